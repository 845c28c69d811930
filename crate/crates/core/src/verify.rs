//! Numerical and Monte-Carlo checks of the identities the integrator rests
//! on: the extrinsic Laplace–Beltrami operator, the Ito drift, the strong
//! order of the scheme and Gibbs stationarity on the circle.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{feasibility_residual, random_point, Matrix, ProductPoint, StiefelPoint};
use crate::par::{map_range, pairwise_sum};
use crate::problem::{FnProblem, Problem};
use crate::rng::{fill_standard_normal, Lane, RngStream};
use crate::sde::sde_step_matrix;

type ValueFn = dyn Fn(&Matrix) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Matrix) -> Matrix + Send + Sync;
type HessFn = dyn Fn(&Matrix, (usize, usize), (usize, usize)) -> f64 + Send + Sync;

/// A smooth function on `ℝ^{n×p}` with its first and second partials.
pub struct TestFunction {
    pub value: Box<ValueFn>,
    pub grad: Box<GradFn>,
    /// `∂_ij ∂_uv φ(X)`.
    pub hess: Box<HessFn>,
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction {
            value: Box::new(move |_| c),
            grad: Box::new(|x| Matrix::zeros(x.nrows(), x.ncols())),
            hess: Box::new(|_, _, _| 0.0),
        }
    }

    /// `tr(CᵀX)`.
    pub fn linear(c: Matrix) -> Self {
        let c2 = c.clone();
        TestFunction {
            value: Box::new(move |x| c.dot(x)),
            grad: Box::new(move |_| c2.clone()),
            hess: Box::new(|_, _, _| 0.0),
        }
    }

    /// `‖X‖²_F`, equal to `p` on the manifold.
    pub fn frobenius_sq() -> Self {
        TestFunction {
            value: Box::new(|x| x.norm_squared()),
            grad: Box::new(|x| x * 2.0),
            hess: Box::new(|_, a, b| if a == b { 2.0 } else { 0.0 }),
        }
    }

    /// `X_a X_b` for two entries (equal entries give a square).
    pub fn entry_product(a: (usize, usize), b: (usize, usize)) -> Self {
        TestFunction {
            value: Box::new(move |x| x[a] * x[b]),
            grad: Box::new(move |x| {
                let mut g = Matrix::zeros(x.nrows(), x.ncols());
                g[a] += x[b];
                g[b] += x[a];
                g
            }),
            hess: Box::new(move |_, s, t| {
                let mut h = 0.0;
                if (s, t) == (a, b) {
                    h += 1.0;
                }
                if (s, t) == (b, a) {
                    h += 1.0;
                }
                h
            }),
        }
    }
}

/// `Δ_M φ = Σ ∂²_ij φ − Σ X_iv X_uj ∂_ij ∂_uv φ − (n−1) Σ X_ij ∂_ij φ`.
pub fn lb_apply(f: &TestFunction, x: &StiefelPoint) -> f64 {
    let x = x.matrix();
    let (n, p) = x.shape();
    let g = (f.grad)(x);
    let mut lap = 0.0;
    let mut mixed = 0.0;
    for i in 0..n {
        for j in 0..p {
            lap += (f.hess)(x, (i, j), (i, j));
            for u in 0..n {
                for v in 0..p {
                    let w = x[(i, v)] * x[(u, j)];
                    if w != 0.0 {
                        mixed += w * (f.hess)(x, (i, j), (u, v));
                    }
                }
            }
        }
    }
    lap - mixed - (n as f64 - 1.0) * x.dot(&g)
}

/// Mean and standard error of a sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = pairwise_sum(xs) / m;
    let dev: Vec<f64> = xs.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if xs.len() > 1 {
        pairwise_sum(&dev) / (m - 1.0)
    } else {
        0.0
    };
    (mean, (var / m).sqrt())
}

fn within(estimate: f64, target: f64, se: f64, h: f64) -> bool {
    (estimate - target).abs() <= 3.0 * se + 5.0 * h * target.abs()
}

fn zscore(estimate: f64, target: f64, se: f64) -> f64 {
    let d = estimate - target;
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * f64::INFINITY
    }
}

/// Brownian increment of sample `s` on the auxiliary lane.
fn sample_increment(rng: &RngStream, s: usize, n: usize, p: usize, h: f64) -> Matrix {
    let mut g = rng.lane(Lane::Auxiliary).step(s as u64).generator();
    fill_standard_normal(&mut g, n, p) * h.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimate: f64,
    pub target: f64,
    pub std_error: f64,
    pub zscore: f64,
    /// `|estimate − target| ≤ 3·SE + 5h|target|`.
    pub passed: bool,
}

/// Estimates `(E φ(W_h) − φ(X₀)) / h` for one step of pure diffusion
/// (`G = 0`, `σ = 1`) and compares it with `½ Δ_M φ(X₀)`.
pub fn generator_mc_check(
    x0: &StiefelPoint,
    f: &TestFunction,
    h: f64,
    num_samples: usize,
    rng: &RngStream,
) -> Result<McResult> {
    if !(h > 0.0) || num_samples < 2 {
        return Err(Error::config("generator_mc_check needs h > 0 and >= 2 samples"));
    }
    let x = x0.matrix();
    let (n, p) = x.shape();
    let zero = Matrix::zeros(n, p);
    let f0 = (f.value)(x);
    let diffs = map_range(num_samples, |s| {
        let db = sample_increment(rng, s, n, p, h);
        let w = sde_step_matrix(x, &zero, h, 1.0, &db);
        ((f.value)(&w) - f0) / h
    });
    let (estimate, se) = mean_se(&diffs);
    let target = 0.5 * lb_apply(f, x0);
    Ok(McResult {
        estimate,
        target,
        std_error: se,
        zscore: zscore(estimate, target, se),
        passed: within(estimate, target, se, h),
    })
}

/// Test hook that corrupts the drift seen by [`ito_drift_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMutation {
    #[default]
    None,
    /// Adds `(n−1)σ²X₀h` to every increment, flipping the drift's sign.
    FlipItoDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftResult {
    pub mean_increment: Matrix,
    pub target: Matrix,
    pub std_error: Matrix,
    pub max_zscore: f64,
    pub passed: bool,
}

/// Entry-wise comparison of `E[W_h − X₀]` under pure diffusion with
/// `−((n−1)/2) σ² X₀ h`.
pub fn ito_drift_check(
    x0: &StiefelPoint,
    h: f64,
    sigma: f64,
    num_samples: usize,
    rng: &RngStream,
    mutation: DriftMutation,
) -> Result<DriftResult> {
    if !(h > 0.0) || num_samples < 2 {
        return Err(Error::config("ito_drift_check needs h > 0 and >= 2 samples"));
    }
    let x = x0.matrix();
    let (n, p) = x.shape();
    let zero = Matrix::zeros(n, p);
    let bias = match mutation {
        DriftMutation::None => Matrix::zeros(n, p),
        DriftMutation::FlipItoDrift => x * ((n as f64 - 1.0) * sigma * sigma * h),
    };
    let incs = map_range(num_samples, |s| {
        let db = sample_increment(rng, s, n, p, h);
        sde_step_matrix(x, &zero, h, sigma, &db) - x + &bias
    });
    let target = x * (-(n as f64 - 1.0) / 2.0 * sigma * sigma * h);
    let mut mean = Matrix::zeros(n, p);
    let mut se = Matrix::zeros(n, p);
    let mut max_z: f64 = 0.0;
    let mut passed = true;
    for i in 0..n {
        for j in 0..p {
            let vals: Vec<f64> = incs.iter().map(|m| m[(i, j)]).collect();
            let (m, s) = mean_se(&vals);
            mean[(i, j)] = m;
            se[(i, j)] = s;
            max_z = max_z.max(zscore(m, target[(i, j)], s).abs());
            passed &= within(m, target[(i, j)], s, h);
        }
    }
    Ok(DriftResult {
        mean_increment: mean,
        target,
        std_error: se,
        max_zscore: max_z,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongOrderResult {
    /// Least-squares slope of `log rms_error` against `log δ`.
    pub slope: f64,
    /// `(δ, rms_error)` per coarse level, finest first.
    pub pairs: Vec<(f64, f64)>,
}

/// Self-convergence test of the scheme with constant `sigma`.
///
/// Every path is simulated on the finest grid (`finest_k` steps of size
/// `T / finest_k`) and on grids coarsened by `2, 4, …, 2^levels`, where the
/// coarse increments are sums of the fine ones.
pub fn strong_order_check(
    problem: &dyn Problem,
    x0: &StiefelPoint,
    t_end: f64,
    sigma: f64,
    finest_k: usize,
    levels: u32,
    num_paths: usize,
    rng: &RngStream,
) -> Result<StrongOrderResult> {
    if levels < 2 || finest_k == 0 || finest_k % (1usize << levels) != 0 {
        return Err(Error::config(
            "strong_order_check needs levels >= 2 and finest_k divisible by 2^levels",
        ));
    }
    if problem.block_dims() != [x0.matrix().shape()] {
        return Err(Error::contract("strong_order_check needs a single-block problem"));
    }
    if !(t_end > 0.0) || num_paths == 0 {
        return Err(Error::config("strong_order_check needs T > 0 and at least one path"));
    }
    let (n, p) = x0.matrix().shape();
    let dt = t_end / finest_k as f64;
    let run = |incs: &[Matrix], delta: f64| -> Matrix {
        let mut y = x0.matrix().clone();
        for db in incs {
            let g = problem.euclidean_gradient(std::slice::from_ref(&y)).remove(0);
            y = sde_step_matrix(&y, &g, delta, sigma, db);
        }
        y
    };
    let per_path: Vec<Vec<f64>> = map_range(num_paths, |path| {
        let mut gen = rng.lane(Lane::Brownian).run(path as u64).generator();
        let fine: Vec<Matrix> = (0..finest_k)
            .map(|_| fill_standard_normal(&mut gen, n, p) * dt.sqrt())
            .collect();
        let reference = run(&fine, dt);
        (1..=levels)
            .map(|l| {
                let m = 1usize << l;
                let coarse: Vec<Matrix> = fine
                    .chunks(m)
                    .map(|c| c.iter().fold(Matrix::zeros(n, p), |acc, d| acc + d))
                    .collect();
                (run(&coarse, dt * m as f64) - &reference).norm_squared()
            })
            .collect()
    });
    let mut pairs = Vec::with_capacity(levels as usize);
    for l in 0..levels as usize {
        let sq: Vec<f64> = per_path.iter().map(|v| v[l]).collect();
        let rms = (pairwise_sum(&sq) / num_paths as f64).sqrt();
        pairs.push((dt * (1usize << (l + 1)) as f64, rms));
    }
    Ok(StrongOrderResult {
        slope: loglog_slope(&pairs),
        pairs,
    })
}

/// Least-squares slope through `(log δ, log e)`; NaN if any error is zero.
fn loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(d, e)| (d.ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub const GIBBS_BINS: usize = 72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsBudget {
    pub dt: f64,
    pub burn_in: usize,
    /// Total retained samples over all chains.
    pub num_samples: usize,
    pub num_chains: usize,
}

impl Default for GibbsBudget {
    fn default() -> Self {
        GibbsBudget {
            dt: 1e-2,
            burn_in: 10_000,
            num_samples: 1_000_000,
            num_chains: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsResult {
    pub tv_distance: f64,
    pub empirical: Vec<f64>,
    pub target: Vec<f64>,
}

/// Bin probabilities of the density `∝ exp(−2c cos θ / σ²)` on `[0, 2π)`
/// by composite Simpson quadrature.
pub fn gibbs_circle_target(c_height: f64, sigma: f64, bins: usize) -> Vec<f64> {
    const SUB: usize = 64;
    let k = 2.0 * c_height / (sigma * sigma);
    let w = 2.0 * PI / bins as f64;
    let density = |t: f64| (-k * (t.cos() + 1.0)).exp();
    let mass: Vec<f64> = (0..bins)
        .map(|b| {
            let a = b as f64 * w;
            let hs = w / SUB as f64;
            let mut s = density(a) + density(a + w);
            for i in 1..SUB {
                s += density(a + i as f64 * hs) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * hs / 3.0
        })
        .collect();
    let z: f64 = mass.iter().sum();
    mass.into_iter().map(|m| m / z).collect()
}

fn angle_bin(x: &Matrix, bins: usize) -> usize {
    let t = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
    ((t / (2.0 * PI) * bins as f64) as usize).min(bins - 1)
}

/// Runs constant-`σ` chains for `F(x) = c·x₁` on the unit circle and
/// returns the total-variation distance between the angle histogram and
/// the Gibbs density `∝ exp(−2F/σ²)`.
pub fn gibbs_circle_check(
    c_height: f64,
    sigma: f64,
    budget: &GibbsBudget,
    rng: &RngStream,
) -> Result<GibbsResult> {
    if !(sigma > 0.0) || !(budget.dt > 0.0) || budget.num_chains == 0 || budget.num_samples == 0
    {
        return Err(Error::config("gibbs_circle_check needs sigma, dt > 0 and a positive budget"));
    }
    let per_chain = budget.num_samples.div_ceil(budget.num_chains);
    let grad = Matrix::from_column_slice(2, 1, &[c_height, 0.0]);
    let sqrt_dt = budget.dt.sqrt();
    let counts: Vec<Vec<u64>> = map_range(budget.num_chains, |chain| {
        let stream = rng.lane(Lane::Brownian).run(chain as u64);
        let mut start_gen = stream.lane(Lane::InitialPoint).generator();
        let mut x = fill_standard_normal(&mut start_gen, 2, 1);
        x /= x.norm();
        let mut gen = stream.generator();
        let mut hist = vec![0u64; GIBBS_BINS];
        for k in 0..budget.burn_in + per_chain {
            let db = fill_standard_normal(&mut gen, 2, 1) * sqrt_dt;
            x = sde_step_matrix(&x, &grad, budget.dt, sigma, &db);
            if (k + 1) % 1000 == 0 {
                x /= x.norm();
            }
            if k >= budget.burn_in {
                hist[angle_bin(&x, GIBBS_BINS)] += 1;
            }
        }
        hist
    });
    let mut total = vec![0u64; GIBBS_BINS];
    for h in &counts {
        for (t, c) in total.iter_mut().zip(h) {
            *t += c;
        }
    }
    let m: u64 = total.iter().sum();
    let empirical: Vec<f64> = total.iter().map(|&c| c as f64 / m as f64).collect();
    let target = gibbs_circle_target(c_height, sigma, GIBBS_BINS);
    let tv = 0.5 * empirical.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(GibbsResult {
        tv_distance: tv,
        empirical,
        target,
    })
}

/// Largest relative error, over blocks, between the analytic Euclidean
/// gradient and central differences of step `h`, measured as
/// `‖G_fd − G‖_F / ‖G‖_F` per block.
pub fn finite_diff_gradient_check(problem: &dyn Problem, x: &ProductPoint, h: f64) -> Result<f64> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::config(format!("finite-difference step must be in [1e-8, 1e-4], got {h}")));
    }
    let blocks = x.blocks();
    let analytic = problem.euclidean_gradient(blocks);
    let mut worst: f64 = 0.0;
    for (b, g) in analytic.iter().enumerate() {
        let (r, c) = blocks[b].shape();
        let fd_entries = map_range(r * c, |e| {
            let (i, j) = (e % r, e / r);
            let mut plus = blocks.to_vec();
            let mut minus = blocks.to_vec();
            plus[b][(i, j)] += h;
            minus[b][(i, j)] -= h;
            (problem.value(&plus) - problem.value(&minus)) / (2.0 * h)
        });
        let fd = Matrix::from_column_slice(r, c, &fd_entries);
        let scale = g.norm().max(f64::MIN_POSITIVE);
        worst = worst.max((fd - g).norm() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub estimate: f64,
    pub target: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub budget: Budget,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Sizes {
    mc_samples: usize,
    strong_k: usize,
    strong_levels: u32,
    strong_paths: usize,
    strong_band: (f64, f64),
    gibbs: GibbsBudget,
    gibbs_tol: f64,
    fd_points: usize,
}

impl Budget {
    fn sizes(self) -> Sizes {
        match self {
            Budget::Full => Sizes {
                mc_samples: 100_000,
                strong_k: 1 << 12,
                strong_levels: 4,
                strong_paths: 200,
                strong_band: (0.35, 0.75),
                gibbs: GibbsBudget::default(),
                gibbs_tol: 0.05,
                fd_points: 100,
            },
            Budget::Quick => Sizes {
                mc_samples: 20_000,
                strong_k: 1 << 10,
                strong_levels: 4,
                strong_paths: 50,
                strong_band: (0.3, 0.8),
                gibbs: GibbsBudget {
                    num_samples: 200_000,
                    ..GibbsBudget::default()
                },
                gibbs_tol: 0.08,
                fd_points: 10,
            },
        }
    }
}

/// The objectives every gradient check runs on.
pub fn gradient_check_problems(rng: &RngStream) -> Result<Vec<Box<dyn Problem>>> {
    use crate::problems::*;
    let aux = rng.lane(Lane::Instance);
    let q = Matrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let b = &q + q.transpose();
    let b2 = b.clone();
    let quadratic = FnProblem::new(
        "quadratic",
        vec![(6, 1)],
        move |x| x[0].dot(&(&b * &x[0])),
        move |x| vec![&b2 * &x[0] * 2.0],
    );
    Ok(vec![
        Box::new(quadratic),
        Box::new(hp1_problem(10)?),
        Box::new(biquad_problem(biquad_make(6, BiquadCase::Alternating, &aux.cycle(1))?)),
        Box::new(stability_problem(&Graph::petersen())),
        Box::new(cryoem_problem(&cryoem_generate(5, 0.0, &aux.cycle(2))?)),
    ])
}

fn timed(name: &str, f: impl FnOnce() -> Result<CheckRecord>) -> Result<CheckRecord> {
    let t = Instant::now();
    let mut rec = f()?;
    rec.name = name.to_string();
    rec.seconds = t.elapsed().as_secs_f64();
    Ok(rec)
}

fn record(passed: bool, estimate: f64, target: f64, tolerance: f64, detail: String) -> CheckRecord {
    CheckRecord {
        name: String::new(),
        passed,
        estimate,
        target,
        tolerance,
        detail,
        seconds: 0.0,
    }
}

/// Runs the whole suite. `mutation` is forwarded to the Ito drift check.
pub fn verify_all(budget: Budget, seed: u64, mutation: DriftMutation) -> Result<VerifyReport> {
    let sz = budget.sizes();
    let rng = RngStream::new(seed);
    let mut checks = Vec::new();

    checks.push(timed("feasibility_m50x5", || {
        let steps = 1000;
        let mut y = random_point(50, 5, &rng.lane(Lane::InitialPoint))?.into_matrix();
        let g = Matrix::zeros(50, 5);
        let mut worst: f64 = 0.0;
        for k in 0..steps {
            let db = sample_increment(&rng.run(1), k, 50, 5, 1e-2);
            y = sde_step_matrix(&y, &g, 1e-2, 1.0, &db);
            worst = worst.max(feasibility_residual(&y));
        }
        Ok(record(worst <= 1e-10, worst, 0.0, 1e-10, format!("{steps} steps, max residual")))
    })?);

    checks.push(timed("lb_constant", || {
        let x = random_point(5, 3, &rng.lane(Lane::InitialPoint).cycle(1))?;
        let v = lb_apply(&TestFunction::frobenius_sq(), &x);
        Ok(record(v.abs() <= 1e-10, v, 0.0, 1e-10, "Δ‖X‖² on M(5,3)".into()))
    })?);

    checks.push(timed("lb_linear", || {
        let x = random_point(5, 3, &rng.lane(Lane::InitialPoint).cycle(2))?;
        let c = rng.lane(Lane::Auxiliary).cycle(2).standard_normal_matrix(5, 3);
        let target = -4.0 * c.dot(x.matrix());
        let v = lb_apply(&TestFunction::linear(c), &x);
        let tol = 1e-10 * (1.0 + target.abs());
        Ok(record((v - target).abs() <= tol, v, target, tol, "Δ tr(CᵀX) on M(5,3)".into()))
    })?);

    checks.push(timed("ito_drift_m3x1", || {
        let x = random_point(3, 1, &rng.lane(Lane::InitialPoint).cycle(3))?;
        let h = 1e-3;
        let r = ito_drift_check(&x, h, 1.0, sz.mc_samples, &rng.run(3), mutation)?;
        let tol = (0..3)
            .map(|i| 3.0 * r.std_error[i] + 5.0 * h * r.target[i].abs())
            .fold(0.0, f64::max);
        let worst = (0..3)
            .map(|i| (r.mean_increment[i] - r.target[i]).abs())
            .fold(0.0, f64::max);
        Ok(record(r.passed, worst, 0.0, tol, format!("max |z| = {:.3}", r.max_zscore)))
    })?);

    for (name, f, cycle) in [
        (
            "generator_linear_m3x2",
            TestFunction::linear(rng.lane(Lane::Auxiliary).cycle(4).standard_normal_matrix(3, 2)),
            4u64,
        ),
        (
            "generator_quadratic_m3x2",
            TestFunction::entry_product((0, 0), (1, 1)),
            5,
        ),
    ] {
        checks.push(timed(name, || {
            let x = random_point(3, 2, &rng.lane(Lane::InitialPoint).cycle(cycle))?;
            let h = 1e-3;
            let r = generator_mc_check(&x, &f, h, sz.mc_samples, &rng.run(cycle))?;
            let tol = 3.0 * r.std_error + 5.0 * h * r.target.abs();
            Ok(record(r.passed, r.estimate, r.target, tol, format!("z = {:.3}", r.zscore)))
        })?);
    }

    checks.push(timed("strong_order_m3x2", || {
        let x = random_point(3, 2, &rng.lane(Lane::InitialPoint).cycle(6))?;
        let zero = FnProblem::zero(vec![(3, 2)]);
        let r = strong_order_check(
            &zero,
            &x,
            0.5,
            1.0,
            sz.strong_k,
            sz.strong_levels,
            sz.strong_paths,
            &rng.run(6),
        )?;
        let (lo, hi) = sz.strong_band;
        Ok(record(
            r.slope >= lo && r.slope <= hi,
            r.slope,
            0.5,
            (hi - lo) / 2.0,
            format!("slope in [{lo}, {hi}], pairs {:?}", r.pairs),
        ))
    })?);

    checks.push(timed("gibbs_circle", || {
        let r = gibbs_circle_check(1.0, 1.0, &sz.gibbs, &rng.run(7))?;
        Ok(record(
            r.tv_distance <= sz.gibbs_tol,
            r.tv_distance,
            0.0,
            sz.gibbs_tol,
            format!("c=1, σ=1, {} samples", sz.gibbs.num_samples),
        ))
    })?);

    checks.push(timed("gradient_finite_differences", || {
        let problems = gradient_check_problems(&rng)?;
        let mut worst: f64 = 0.0;
        let mut names = Vec::new();
        for (k, p) in problems.iter().enumerate() {
            for s in 0..sz.fd_points {
                let x = ProductPoint::random(
                    p.block_dims(),
                    &rng.lane(Lane::InitialPoint).run(8).cycle(k as u64).step(1000 * s as u64),
                )?;
                worst = worst.max(finite_diff_gradient_check(p.as_ref(), &x, 1e-6)?);
            }
            names.push(p.name().to_string());
        }
        Ok(record(
            worst <= 1e-4,
            worst,
            0.0,
            1e-4,
            format!("{} points each on {}", sz.fd_points, names.join(", ")),
        ))
    })?);

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        budget,
        seed,
        passed,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lb_of_constant_on_manifold_functions() {
        let x = random_point(6, 3, &RngStream::new(1)).unwrap();
        assert!(lb_apply(&TestFunction::frobenius_sq(), &x).abs() < 1e-10);
        assert_eq!(lb_apply(&TestFunction::constant(3.0), &x), 0.0);
    }

    #[test]
    fn lb_of_linear() {
        let x = random_point(4, 2, &RngStream::new(2)).unwrap();
        let c = RngStream::new(3).standard_normal_matrix(4, 2);
        let target = -3.0 * c.dot(x.matrix());
        assert!((lb_apply(&TestFunction::linear(c), &x) - target).abs() < 1e-12);
    }

    #[test]
    fn hessians_are_symmetric() {
        let f = TestFunction::entry_product((0, 1), (2, 0));
        let x = Matrix::zeros(3, 2);
        for a in [(0, 1), (2, 0), (1, 1)] {
            for b in [(0, 1), (2, 0), (1, 0)] {
                assert_eq!((f.hess)(&x, a, b), (f.hess)(&x, b, a));
            }
        }
    }

    #[test]
    fn gibbs_target_is_normalized_and_uniform_at_zero_height() {
        let t = gibbs_circle_target(0.0, 1.0, 72);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(t.iter().all(|v| (v - 1.0 / 72.0).abs() < 1e-14));
        let t = gibbs_circle_target(1.0, 1.0, 72);
        // Mass concentrates near θ = π where cos θ = −1.
        assert!(t[36] > t[0]);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pairs: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&d| (d, 3.0 * d * d)).collect();
        assert!((loglog_slope(&pairs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn strong_order_rejects_bad_levels() {
        let x = random_point(3, 2, &RngStream::new(0)).unwrap();
        let zero = FnProblem::zero(vec![(3, 2)]);
        assert!(strong_order_check(&zero, &x, 0.5, 1.0, 100, 4, 2, &RngStream::new(0)).is_err());
    }

    #[test]
    fn zero_noise_zero_gradient_has_no_error() {
        let x = random_point(3, 2, &RngStream::new(0)).unwrap();
        let zero = FnProblem::zero(vec![(3, 2)]);
        let r = strong_order_check(&zero, &x, 0.5, 0.0, 64, 2, 3, &RngStream::new(0)).unwrap();
        assert!(r.pairs.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn finite_difference_step_range() {
        let p = FnProblem::rayleigh(vec![1.0, 2.0]);
        let x = ProductPoint::random(&[(2, 1)], &RngStream::new(0)).unwrap();
        assert!(finite_diff_gradient_check(&p, &x, 1e-3).is_err());
        assert!(finite_diff_gradient_check(&p, &x, 1e-6).unwrap() < 1e-8);
    }
}
