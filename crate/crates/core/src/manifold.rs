//! Stiefel manifold geometry under the canonical metric.
//!
//! `M(n, p) = { X ∈ ℝ^{n×p} : XᵀX = I_p }`. Points are stored as
//! [`nalgebra::DMatrix<f64>`], which keeps entries in column-major order in
//! memory. Text files written by this crate always list matrix entries in
//! row-major order, one matrix row after the other.
//!
//! The Cayley update `Y⁺ = (I − A/2)⁻¹(I + A/2)Y` with `A = ZYᵀ − YZᵀ` is the
//! only way iterates move; it is orthogonal for skew `A`, so feasibility is
//! preserved up to rounding. For `2p < n` the update is computed through the
//! `2p × 2p` Sherman–Morrison–Woodbury system, for `p = 1` through its scalar
//! closed form.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type Matrix = DMatrix<f64>;

/// Default tolerance on `‖XᵀX − I‖_F` for a point to count as feasible.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

/// Tolerance on `‖A + Aᵀ‖_F` for a generator to count as skew-symmetric.
pub const SKEW_TOL: f64 = 1e-10;

/// `‖XᵀX − I_p‖_F`.
pub fn feasibility_residual(x: &Matrix) -> f64 {
    let p = x.ncols();
    (x.transpose() * x - Matrix::identity(p, p)).norm()
}

/// True iff `‖XᵀX − I_p‖_F ≤ tol`.
pub fn check_feasible(x: &Matrix, tol: f64) -> bool {
    !x.is_empty() && feasibility_residual(x) <= tol
}

/// `‖ZᵀX + XᵀZ‖_F`, zero exactly for tangent vectors.
pub fn tangency_residual(x: &Matrix, z: &Matrix) -> f64 {
    let xtz = x.transpose() * z;
    (&xtz + xtz.transpose()).norm()
}

fn check_shape(context: &'static str, expected: &Matrix, actual: &Matrix) -> Result<()> {
    if expected.shape() != actual.shape() {
        return Err(Error::Dimension {
            context,
            expected: expected.shape(),
            actual: actual.shape(),
        });
    }
    Ok(())
}

/// A point on `M(n, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    value: Matrix,
    feas_tol: f64,
}

impl StiefelPoint {
    /// Wraps `value` after checking `1 ≤ p ≤ n` and feasibility at
    /// [`DEFAULT_FEAS_TOL`].
    pub fn new(value: Matrix) -> Result<Self> {
        Self::with_tolerance(value, DEFAULT_FEAS_TOL)
    }

    pub fn with_tolerance(value: Matrix, feas_tol: f64) -> Result<Self> {
        let (n, p) = value.shape();
        if p == 0 || p > n {
            return Err(Error::contract(format!(
                "Stiefel point needs 1 <= p <= n, got n={n}, p={p}"
            )));
        }
        let res = feasibility_residual(&value);
        if !(res <= feas_tol) {
            return Err(Error::contract(format!(
                "infeasible point: |X^T X - I| = {res:e} > {feas_tol:e}"
            )));
        }
        Ok(StiefelPoint { value, feas_tol })
    }

    /// Skips the feasibility check. Used for outputs of orthogonal updates,
    /// whose feasibility is checked in debug builds only.
    pub(crate) fn from_matrix_unchecked(value: Matrix) -> Self {
        debug_assert!(
            feasibility_residual(&value) <= 1e-6,
            "from_matrix_unchecked given an infeasible matrix"
        );
        StiefelPoint {
            value,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }

    /// The first `p` columns of the `n × n` identity.
    pub fn identity(n: usize, p: usize) -> Result<Self> {
        Self::new(Matrix::identity(n, p))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.value
    }

    pub fn into_matrix(self) -> Matrix {
        self.value
    }

    pub fn n(&self) -> usize {
        self.value.nrows()
    }

    pub fn p(&self) -> usize {
        self.value.ncols()
    }

    pub fn feas_tol(&self) -> f64 {
        self.feas_tol
    }

    pub fn residual(&self) -> f64 {
        feasibility_residual(&self.value)
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: StiefelPoint,
    pub value: Matrix,
}

impl TangentVector {
    pub fn residual(&self) -> f64 {
        tangency_residual(self.base.matrix(), &self.value)
    }
}

/// An ordered list of Stiefel blocks, one per orthogonality constraint.
///
/// Blocks are stored as plain matrices so objectives can borrow them as a
/// slice; every constructor except the crate-internal unchecked one
/// verifies feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    blocks: Vec<Matrix>,
}

impl ProductPoint {
    pub fn new(blocks: Vec<StiefelPoint>) -> Self {
        ProductPoint {
            blocks: blocks.into_iter().map(StiefelPoint::into_matrix).collect(),
        }
    }

    pub fn single(point: StiefelPoint) -> Self {
        ProductPoint {
            blocks: vec![point.into_matrix()],
        }
    }

    /// Builds a product point from raw blocks, checking each at the default
    /// tolerance.
    pub fn from_matrices(blocks: Vec<Matrix>) -> Result<Self> {
        for b in &blocks {
            StiefelPoint::new(b.clone())?;
        }
        Ok(ProductPoint { blocks })
    }

    pub(crate) fn from_matrices_unchecked(blocks: Vec<Matrix>) -> Self {
        debug_assert!(blocks.iter().all(|b| feasibility_residual(b) <= 1e-6));
        ProductPoint { blocks }
    }

    /// The block matrices, in order.
    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Matrix {
        &self.blocks[i]
    }

    pub fn point(&self, i: usize) -> StiefelPoint {
        StiefelPoint::from_matrix_unchecked(self.blocks[i].clone())
    }

    pub fn into_blocks(self) -> Vec<Matrix> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| b.shape()).collect()
    }

    /// Largest per-block feasibility residual.
    pub fn max_residual(&self) -> f64 {
        self.blocks.iter().map(feasibility_residual).fold(0.0, f64::max)
    }

    /// Random point with every block drawn by [`random_point`]; block `i`
    /// uses stream step `i`.
    pub fn random(dims: &[(usize, usize)], rng: &RngStream) -> Result<Self> {
        dims.iter()
            .enumerate()
            .map(|(i, &(n, p))| random_point(n, p, &rng.step(i as u64)))
            .collect::<Result<Vec<_>>>()
            .map(ProductPoint::new)
    }
}

/// Serialized form: each block as `{rows, cols, data}` with `data` in
/// row-major order.
#[derive(Serialize, Deserialize)]
struct BlockRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub(crate) fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub(crate) fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

impl Serialize for ProductPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<BlockRepr> = self
            .blocks
            .iter()
            .map(|b| BlockRepr {
                rows: b.nrows(),
                cols: b.ncols(),
                data: row_major(b),
            })
            .collect();
        reprs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let reprs = Vec::<BlockRepr>::deserialize(d)?;
        let blocks = reprs
            .into_iter()
            .map(|r| {
                if r.data.len() != r.rows * r.cols {
                    return Err(serde::de::Error::custom("block data length mismatch"));
                }
                StiefelPoint::new(from_row_major(r.rows, r.cols, &r.data))
                    .map_err(serde::de::Error::custom)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ProductPoint::new(blocks))
    }
}

/// Coefficients of the noise projector `P_X(Z) = Z − αXZᵀX − βXXᵀZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ProjectionCoefficients {
    fn default() -> Self {
        ProjectionCoefficients {
            alpha: SQRT_2 / 2.0,
            beta: 1.0 - SQRT_2 / 2.0,
        }
    }
}

pub(crate) fn project_tangent_matrix(x: &Matrix, z: &Matrix) -> Matrix {
    let c = ProjectionCoefficients::default();
    let ztx = z.transpose() * x;
    let xtz = x.transpose() * z;
    z - (x * ztx) * c.alpha - (x * xtz) * c.beta
}

/// Projects an ambient matrix onto `T_X M` with the canonical-metric noise
/// projector. Not an orthogonal projector, but `P_X(Z)` is always tangent and
/// `P_X(X) = 0`.
pub fn project_tangent(x: &StiefelPoint, z: &Matrix) -> Result<TangentVector> {
    check_shape("project_tangent", x.matrix(), z)?;
    Ok(TangentVector {
        base: x.clone(),
        value: project_tangent_matrix(x.matrix(), z),
    })
}

pub(crate) fn canonical_gradient_matrix(x: &Matrix, g: &Matrix) -> Matrix {
    let gtx = g.transpose() * x;
    g - x * gtx
}

/// Riemannian gradient under the canonical metric: `G − XGᵀX`.
pub fn canonical_gradient(x: &StiefelPoint, g: &Matrix) -> Result<TangentVector> {
    check_shape("canonical_gradient", x.matrix(), g)?;
    Ok(TangentVector {
        base: x.clone(),
        value: canonical_gradient_matrix(x.matrix(), g),
    })
}

pub(crate) fn canonical_inner_matrix(x: &Matrix, z1: &Matrix, z2: &Matrix) -> f64 {
    let xtz1 = x.transpose() * z1;
    let xtz2 = x.transpose() * z2;
    z1.dot(z2) - 0.5 * xtz1.dot(&xtz2)
}

/// `g^c(Z₁, Z₂) = tr(Z₁ᵀ(I − ½XXᵀ)Z₂)`.
pub fn canonical_inner(x: &StiefelPoint, z1: &TangentVector, z2: &TangentVector) -> Result<f64> {
    if z1.base.matrix() != x.matrix() || z2.base.matrix() != x.matrix() {
        return Err(Error::contract(
            "canonical_inner: tangent vectors are based at a different point",
        ));
    }
    Ok(canonical_inner_matrix(x.matrix(), &z1.value, &z2.value))
}

/// `A = ZYᵀ − YZᵀ`.
pub fn skew_generator(y: &Matrix, z: &Matrix) -> Matrix {
    let zyt = z * y.transpose();
    &zyt - zyt.transpose()
}

fn dense_cayley(y: &Matrix, a: &Matrix) -> Option<Matrix> {
    let n = y.nrows();
    let id = Matrix::identity(n, n);
    let lhs = &id - a * 0.5;
    let rhs = (&id + a * 0.5) * y;
    lhs.lu().solve(&rhs)
}

/// `Y⁺ = (I − A/2)⁻¹(I + A/2)Y` for skew-symmetric `A`, by a dense LU solve.
pub fn cayley_step(y: &StiefelPoint, a: &Matrix) -> Result<StiefelPoint> {
    let n = y.n();
    if a.shape() != (n, n) {
        return Err(Error::Dimension {
            context: "cayley_step",
            expected: (n, n),
            actual: a.shape(),
        });
    }
    let skew = (a + a.transpose()).norm();
    if skew > SKEW_TOL {
        return Err(Error::contract(format!(
            "cayley_step: generator is not skew-symmetric (|A + A^T| = {skew:e})"
        )));
    }
    // I − A/2 is invertible for every real skew A.
    let out = dense_cayley(y.matrix(), a)
        .ok_or_else(|| Error::contract("cayley_step: I - A/2 is singular"))?;
    Ok(StiefelPoint::from_matrix_unchecked(out))
}

/// Result of [`cayley_step_smw`].
#[derive(Debug, Clone)]
pub struct CayleyOutcome {
    pub point: StiefelPoint,
    /// Set when the `2p × 2p` system was singular and the dense solve was
    /// used instead.
    pub fell_back: bool,
}

fn smw_cayley(y: &Matrix, z: &Matrix) -> Option<Matrix> {
    let p = y.ncols();
    let n = y.nrows();
    let mut u = Matrix::zeros(n, 2 * p);
    u.columns_mut(0, p).copy_from(z);
    u.columns_mut(p, p).copy_from(y);
    let mut v = Matrix::zeros(n, 2 * p);
    v.columns_mut(0, p).copy_from(y);
    v.columns_mut(p, p).copy_from(&(-z));
    let vt = v.transpose();
    let m = Matrix::identity(2 * p, 2 * p) - (&vt * &u) * 0.5;
    let rhs = &vt * y;
    let w = m.clone().lu().solve(&rhs)?;
    // Reject numerically singular systems through the solve residual.
    let resid = (&m * &w - &rhs).norm();
    if !resid.is_finite() || resid > 1e-8 * (1.0 + rhs.norm()) {
        return None;
    }
    Some(y + u * w)
}

/// Cayley update with `A = ZYᵀ − YZᵀ` through the low-rank
/// Sherman–Morrison–Woodbury identity `Y⁺ = Y + U(I − ½VᵀU)⁻¹VᵀY`,
/// `U = [Z, Y]`, `V = [Y, −Z]`. Costs `O(np²)`.
pub fn cayley_step_smw(y: &StiefelPoint, z: &Matrix) -> Result<CayleyOutcome> {
    check_shape("cayley_step_smw", y.matrix(), z)?;
    match smw_cayley(y.matrix(), z) {
        Some(out) => Ok(CayleyOutcome {
            point: StiefelPoint::from_matrix_unchecked(out),
            fell_back: false,
        }),
        None => {
            let a = skew_generator(y.matrix(), z);
            Ok(CayleyOutcome {
                point: cayley_step(y, &a)?,
                fell_back: true,
            })
        }
    }
}

/// Closed form of the Cayley update on the unit sphere (`p = 1`):
/// with `a = zᵀy`, `c = zᵀz`, `d = 1 − a²/4 + c/4`,
/// `y⁺ = y + z/d − (a − a²/2 + c/2)/d · y`.
///
/// Evaluated in the equivalent rotation form: with `w = z − a·y` and
/// `r² = ‖w‖²` (so `d = 1 + r²/4`), `y⁺ = ((1 − r²/4)·y + w)/d`, which keeps
/// `‖y⁺‖ = 1` to rounding even for long steps.
pub fn cayley_step_vector(y: &Matrix, z: &Matrix) -> Matrix {
    debug_assert_eq!(y.ncols(), 1);
    // Dividing by ‖y‖² keeps w ⟂ y exactly when y has drifted off the
    // sphere by rounding; otherwise a long step amplifies that drift.
    let a = z.dot(y) / y.norm_squared();
    let w = z - y * a;
    let r2 = w.norm_squared();
    let d = 1.0 + 0.25 * r2;
    (y * (1.0 - 0.25 * r2) + w) / d
}

/// Cayley update `Y⁺ = (I − A/2)⁻¹(I + A/2)Y`, `A = ZYᵀ − YZᵀ`, routed to the
/// cheapest exact path: scalar closed form for `p = 1`, SMW for `2p < n`,
/// dense LU otherwise.
pub(crate) fn cayley_update(y: &Matrix, z: &Matrix) -> Matrix {
    let (n, p) = y.shape();
    if p == 1 {
        return cayley_step_vector(y, z);
    }
    if 2 * p < n {
        if let Some(out) = smw_cayley(y, z) {
            return out;
        }
    }
    let a = skew_generator(y, z);
    dense_cayley(y, &a).expect("I - A/2 is invertible for skew A")
}

/// Reduced QR with non-negative diagonal in `R`; returns the `Q` factor.
pub fn qr_retract(x: &Matrix) -> Result<StiefelPoint> {
    let (n, p) = x.shape();
    if p == 0 || p > n {
        return Err(Error::contract(format!(
            "qr_retract needs 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = x.norm().max(f64::MIN_POSITIVE);
    for j in 0..p {
        let rjj = r[(j, j)];
        if !(rjj.abs() > 1e-12 * scale) {
            return Err(Error::NumericalRank { column: j });
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(StiefelPoint::from_matrix_unchecked(q))
}

/// Q factor of an `n × p` standard Gaussian matrix: uniform on `M(n, p)`.
pub fn random_point(n: usize, p: usize, rng: &RngStream) -> Result<StiefelPoint> {
    if p == 0 || p > n {
        return Err(Error::contract(format!(
            "random_point needs 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    let mut gen = rng.generator();
    loop {
        let g = crate::rng::fill_standard_normal(&mut gen, n, p);
        // Rank deficiency has probability zero; redraw if it happens.
        if let Ok(q) = qr_retract(&g) {
            return Ok(q);
        }
    }
}
