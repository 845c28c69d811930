//! Orientation recovery from common lines.
//!
//! Each image `i` has an unknown rotation `R̃_i ∈ SO(3)`; the optimization
//! variable is its first two columns `R_i ∈ M(3,2)`. For a pair `i, j` the
//! common line seen in image `i` is `c_ij ∈ ℝ²`, and at the truth
//! `R_i c_ij = R_j c_ji`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{qr_retract, Matrix, ProductPoint, StiefelPoint};
use crate::problem::Problem;
use crate::rng::{fill_standard_normal, Lane, RngStream};

pub const DEFAULT_Q: f64 = 0.5;
pub const DEFAULT_SMOOTHING_EPS: f64 = 1e-6;
const DEGENERATE_CROSS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CryoEmInstance {
    pub true_rotations: Vec<Matrix3<f64>>,
    /// `common_lines[i * N + j]` is `c_ij`; the diagonal is unused (zero).
    pub common_lines: Vec<[f64; 2]>,
    pub corruption_p: f64,
    pub q: f64,
    pub smoothing_eps: f64,
}

impl CryoEmInstance {
    pub fn num_images(&self) -> usize {
        self.true_rotations.len()
    }

    pub fn line(&self, i: usize, j: usize) -> [f64; 2] {
        self.common_lines[i * self.num_images() + j]
    }

    /// The first two columns of every true rotation.
    pub fn truth_point(&self) -> ProductPoint {
        ProductPoint::from_matrices_unchecked(
            self.true_rotations
                .iter()
                .map(|r| Matrix::from_fn(3, 2, |a, b| r[(a, b)]))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_images();
        if n < 2 {
            return Err(Error::contract("cryo-EM instance needs at least 2 images"));
        }
        if self.common_lines.len() != n * n {
            return Err(Error::Dimension {
                context: "common-line table",
                expected: (n * n, 2),
                actual: (self.common_lines.len(), 2),
            });
        }
        if !(0.0..=1.0).contains(&self.corruption_p) {
            return Err(Error::contract("corruption_p must lie in [0,1]"));
        }
        if !(self.q > 0.0) || !(self.smoothing_eps > 0.0) {
            return Err(Error::contract("q and smoothing_eps must be positive"));
        }
        for (i, r) in self.true_rotations.iter().enumerate() {
            let orth = (r.transpose() * r - Matrix3::identity()).norm();
            if orth > 1e-10 || (r.determinant() - 1.0).abs() > 1e-10 {
                return Err(Error::contract(format!("rotation {} is not in SO(3)", i + 1)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let [x, y] = self.line(i, j);
                    if ((x * x + y * y).sqrt() - 1.0).abs() > 1e-10 {
                        return Err(Error::contract(format!(
                            "common line ({}, {}) is not a unit vector",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Structured text form: header keys, rotations row-major, then every
    /// ordered pair `i j x y` (1-based).
    pub fn to_text(&self) -> String {
        let n = self.num_images();
        let mut s = String::new();
        let _ = writeln!(s, "cryoem_instance 1");
        let _ = writeln!(s, "num_images {n}");
        let _ = writeln!(s, "corruption_p {:e}", self.corruption_p);
        let _ = writeln!(s, "q {:e}", self.q);
        let _ = writeln!(s, "smoothing_eps {:e}", self.smoothing_eps);
        let _ = writeln!(s, "rotations");
        for r in &self.true_rotations {
            let row: Vec<String> = (0..3)
                .flat_map(|a| (0..3).map(move |b| (a, b)))
                .map(|(a, b)| format!("{:e}", r[(a, b)]))
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "common_lines");
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let [x, y] = self.line(i, j);
                    let _ = writeln!(s, "{} {} {:e} {:e}", i + 1, j + 1, x, y);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: text.lines().count(),
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let perr = |line: usize, message: String| Error::Parse { line, message };

        let keyed = |(line, l): (usize, &str), key: &str| -> Result<String> {
            let mut t = l.split_whitespace();
            if t.next() != Some(key) {
                return Err(perr(line, format!("expected '{key}', found '{l}'")));
            }
            let v = t
                .next()
                .ok_or_else(|| perr(line, format!("missing value for '{key}'")))?;
            Ok(v.to_string())
        };
        let num = |line: usize, tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|_| perr(line, format!("invalid number '{tok}'")))
        };

        let header = next("header")?;
        if keyed(header, "cryoem_instance")? != "1" {
            return Err(perr(header.0, "unsupported format version".into()));
        }
        let l = next("num_images")?;
        let n: usize = keyed(l, "num_images")?
            .parse()
            .map_err(|_| perr(l.0, "invalid num_images".into()))?;
        let l = next("corruption_p")?;
        let corruption_p = num(l.0, &keyed(l, "corruption_p")?)?;
        let l = next("q")?;
        let q = num(l.0, &keyed(l, "q")?)?;
        let l = next("smoothing_eps")?;
        let smoothing_eps = num(l.0, &keyed(l, "smoothing_eps")?)?;

        let l = next("rotations")?;
        if l.1 != "rotations" {
            return Err(perr(l.0, format!("expected 'rotations', found '{}'", l.1)));
        }
        let mut true_rotations = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, row) = next("rotation row")?;
            let vals = row
                .split_whitespace()
                .map(|t| num(line, t))
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 9 {
                return Err(perr(line, format!("expected 9 entries, found {}", vals.len())));
            }
            true_rotations.push(Matrix3::from_row_slice(&vals));
        }
        let l = next("common_lines")?;
        if l.1 != "common_lines" {
            return Err(perr(l.0, format!("expected 'common_lines', found '{}'", l.1)));
        }
        let mut common_lines = vec![[0.0; 2]; n * n];
        let mut seen = vec![false; n * n];
        for _ in 0..n * n.saturating_sub(1) {
            let (line, row) = next("common line")?;
            let t: Vec<&str> = row.split_whitespace().collect();
            if t.len() != 4 {
                return Err(perr(line, format!("expected 'i j x y', found '{row}'")));
            }
            let idx = |tok: &str| -> Result<usize> {
                match tok.parse::<usize>() {
                    Ok(v) if (1..=n).contains(&v) => Ok(v - 1),
                    _ => Err(perr(line, format!("image index '{tok}' out of range 1..={n}"))),
                }
            };
            let (i, j) = (idx(t[0])?, idx(t[1])?);
            if i == j || seen[i * n + j] {
                return Err(perr(line, format!("invalid or repeated pair ({}, {})", i + 1, j + 1)));
            }
            seen[i * n + j] = true;
            common_lines[i * n + j] = [num(line, t[2])?, num(line, t[3])?];
        }
        if let Some((line, extra)) = lines.next() {
            return Err(perr(line, format!("unexpected trailing content '{extra}'")));
        }
        let inst = CryoEmInstance {
            true_rotations,
            common_lines,
            corruption_p,
            q,
            smoothing_eps,
        };
        inst.validate()?;
        Ok(inst)
    }
}

fn haar_rotation<R: Rng>(g: &mut R) -> Matrix3<f64> {
    loop {
        let m = fill_standard_normal(g, 3, 3);
        if let Ok(q) = qr_retract(&m) {
            let mut r = Matrix3::from_fn(|a, b| q.matrix()[(a, b)]);
            if r.determinant() < 0.0 {
                r.column_mut(2).neg_mut();
            }
            return r;
        }
    }
}

fn unit_circle<R: Rng>(g: &mut R) -> [f64; 2] {
    let t = g.random::<f64>() * 2.0 * PI;
    [t.cos(), t.sin()]
}

/// Draws `n` Haar rotations and their common lines; each unordered pair is
/// replaced by two uniform unit vectors with probability `corruption_p`.
///
/// Both lines of a pair use the same direction `unit(R³_i × R³_j)`, so
/// `R_i c_ij = R_j c_ji` holds exactly on clean pairs.
pub fn cryoem_generate(n: usize, corruption_p: f64, rng: &RngStream) -> Result<CryoEmInstance> {
    if n < 2 {
        return Err(Error::config(format!("cryo-EM needs at least 2 images, got {n}")));
    }
    if !(0.0..=1.0).contains(&corruption_p) {
        return Err(Error::config(format!("corruption_p must be in [0,1], got {corruption_p}")));
    }
    let mut g = rng.lane(Lane::Instance).generator();
    let mut rots: Vec<Matrix3<f64>> = Vec::with_capacity(n);
    while rots.len() < n {
        let r = haar_rotation(&mut g);
        let r3: Vector3<f64> = r.column(2).into();
        let ok = rots.iter().all(|o| {
            let o3: Vector3<f64> = o.column(2).into();
            o3.cross(&r3).norm() >= DEGENERATE_CROSS
        });
        if ok {
            rots.push(r);
        }
    }
    let mut lines = vec![[0.0; 2]; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (ri, rj) = (&rots[i], &rots[j]);
            let ci: Vector3<f64> = ri.column(2).into();
            let cj: Vector3<f64> = rj.column(2).into();
            let gamma = ci.cross(&cj).normalize();
            let a = ri.transpose() * gamma;
            let b = rj.transpose() * gamma;
            let corrupt = g.random::<f64>() < corruption_p;
            if corrupt {
                lines[i * n + j] = unit_circle(&mut g);
                lines[j * n + i] = unit_circle(&mut g);
            } else {
                // The third components vanish since γ ⟂ R³_i, R³_j.
                lines[i * n + j] = [a[0], a[1]];
                lines[j * n + i] = [b[0], b[1]];
            }
        }
    }
    Ok(CryoEmInstance {
        true_rotations: rots,
        common_lines: lines,
        corruption_p,
        q: DEFAULT_Q,
        smoothing_eps: DEFAULT_SMOOTHING_EPS,
    })
}

/// `Σ_{i<j} Σ_l ((u_l − v_l)² + ε²)^{q/2}` with `u = R_i c_ij`, `v = R_j c_ji`.
pub struct CryoEm {
    n: usize,
    lines: Vec<[f64; 2]>,
    q: f64,
    eps2: f64,
    dims: Vec<(usize, usize)>,
}

pub fn cryoem_problem(inst: &CryoEmInstance) -> CryoEm {
    let n = inst.num_images();
    CryoEm {
        n,
        lines: inst.common_lines.clone(),
        q: inst.q,
        eps2: inst.smoothing_eps * inst.smoothing_eps,
        dims: vec![(3, 2); n],
    }
}

fn apply(r: &Matrix, c: [f64; 2]) -> [f64; 3] {
    std::array::from_fn(|a| r[(a, 0)] * c[0] + r[(a, 1)] * c[1])
}

impl CryoEm {
    fn pair_terms(&self, blocks: &[Matrix], mut visit: impl FnMut(usize, usize, [f64; 3])) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let u = apply(&blocks[i], self.lines[i * n + j]);
                let v = apply(&blocks[j], self.lines[j * n + i]);
                let mut w = [0.0; 3];
                for l in 0..3 {
                    let d = u[l] - v[l];
                    let s = d * d + self.eps2;
                    total += s.powf(0.5 * self.q);
                    w[l] = self.q * s.powf(0.5 * self.q - 1.0) * d;
                }
                visit(i, j, w);
            }
        }
        total
    }
}

impl Problem for CryoEm {
    fn name(&self) -> &str {
        "cryoem"
    }

    fn block_dims(&self) -> &[(usize, usize)] {
        &self.dims
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        self.pair_terms(blocks, |_, _, _| {})
    }

    fn euclidean_gradient(&self, blocks: &[Matrix]) -> Vec<Matrix> {
        self.value_and_gradient(blocks).1
    }

    fn value_and_gradient(&self, blocks: &[Matrix]) -> (f64, Vec<Matrix>) {
        let n = self.n;
        let mut grads = vec![Matrix::zeros(3, 2); n];
        let f = self.pair_terms(blocks, |i, j, w| {
            let (ci, cj) = (self.lines[i * n + j], self.lines[j * n + i]);
            for a in 0..3 {
                for b in 0..2 {
                    grads[i][(a, b)] += w[a] * ci[b];
                    grads[j][(a, b)] -= w[a] * cj[b];
                }
            }
        });
        (f, grads)
    }
}

/// Nearest point of `M(3,2)` in Frobenius norm: `UVᵀ` from the thin SVD.
fn procrustes_round(m: &Matrix) -> Result<Matrix> {
    let svd = m.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Initialization("SVD did not converge".into())),
    };
    Ok(u * vt)
}

/// Spectral initializer: top three eigenvectors of the `2N × 2N` matrix with
/// off-diagonal blocks `c_ij c_jiᵀ`, split into `2 × 3` slices, transposed
/// and rounded to `M(3,2)`.
pub fn eigs_init(inst: &CryoEmInstance) -> Result<ProductPoint> {
    let n = inst.num_images();
    if n < 3 {
        return Err(Error::Initialization(format!("eigs needs at least 3 images, got {n}")));
    }
    let mut s = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (ci, cj) = (inst.line(i, j), inst.line(j, i));
                for a in 0..2 {
                    for b in 0..2 {
                        s[(2 * i + a, 2 * j + b)] = ci[a] * cj[b];
                    }
                }
            }
        }
    }
    // Symmetric by construction: block (j,i) = c_ji c_ijᵀ = (c_ij c_jiᵀ)ᵀ.
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Initialization("eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top: Vec<usize> = order[..3].to_vec();
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let m = Matrix::from_fn(3, 2, |a, b| eig.eigenvectors[(2 * i + b, top[a])]);
        if !m.iter().all(|v| v.is_finite()) || m.norm() == 0.0 {
            return Err(Error::Initialization(format!("degenerate eigenvector block {}", i + 1)));
        }
        let r = procrustes_round(&m)?;
        blocks.push(StiefelPoint::new(r)?);
    }
    Ok(ProductPoint::new(blocks))
}

/// Appends `r₁ × r₂` as the third column; the result lies in SO(3).
pub fn complete_rotation(r: &Matrix) -> Result<Matrix3<f64>> {
    if r.shape() != (3, 2) {
        return Err(Error::Dimension {
            context: "complete_rotation",
            expected: (3, 2),
            actual: r.shape(),
        });
    }
    let c1 = Vector3::new(r[(0, 0)], r[(1, 0)], r[(2, 0)]);
    let c2 = Vector3::new(r[(0, 1)], r[(1, 1)], r[(2, 1)]);
    let c3 = c1.cross(&c2);
    Ok(Matrix3::from_columns(&[c1, c2, c3]))
}

pub fn complete_all(x: &ProductPoint) -> Result<Vec<Matrix3<f64>>> {
    x.blocks().iter().map(complete_rotation).collect()
}

/// `min_{OᵀO = I} Σ ‖R̂_i − O R̃_i‖²_F`, with `O` ranging over all of O(3).
pub fn procrustes_mse(estimated: &[Matrix3<f64>], truth: &[Matrix3<f64>]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::contract(format!(
            "procrustes_mse: {} estimates vs {} true rotations",
            estimated.len(),
            truth.len()
        )));
    }
    let m: Matrix3<f64> = estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| e * t.transpose())
        .sum();
    let svd = m.svd(true, true);
    let o = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    Ok(estimated
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - o * t).norm_squared())
        .sum())
}

/// Procrustes MSE that also accepts the mirrored solution `J R̂_i J`,
/// `J = diag(1, 1, −1)`, which fits the common-line data equally well.
pub fn handedness_mse(estimated: &[Matrix3<f64>], truth: &[Matrix3<f64>]) -> Result<f64> {
    let j = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    let mirrored: Vec<Matrix3<f64>> = estimated.iter().map(|r| j * r * j).collect();
    Ok(procrustes_mse(estimated, truth)?.min(procrustes_mse(&mirrored, truth)?))
}
