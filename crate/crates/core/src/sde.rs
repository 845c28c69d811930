//! Projected-noise SDE on Stiefel manifolds.
//!
//! One step of the scheme, for step length `δ`, strength `σ` and an ambient
//! Gaussian increment `δB ~ N(0, δ)`:
//!
//! ```text
//! Z  = −δG + σ(I − βYYᵀ)δB
//! A  = ZYᵀ − YZᵀ
//! Y⁺ = (I − A/2)⁻¹(I + A/2)Y
//! ```
//!
//! For `p = n`, `(I − βYYᵀ) = αI`; for `p = 1` the normal part of `Z` drops
//! out of `A`, so the noise enters unprojected. With `σ = 0` the step is the
//! fixed-step Cayley gradient flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    cayley_update, qr_retract, Matrix, ProductPoint, ProjectionCoefficients, StiefelPoint,
};
use crate::problem::Problem;
use crate::rng::{fill_standard_normal, Lane, RngStream};

/// Steps between feasibility audits in [`sde_simulate_product`].
pub const REPROJECT_EVERY: usize = 100;
/// Residual above which an audit re-orthonormalizes with QR.
pub const REPROJECT_TOL: f64 = 1e-8;

/// Rule giving the diffusion strength `σ_k` of step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSchedule {
    Constant {
        sigma: f64,
    },
    /// `σ_i` on `[S_i, S_i + T_i)` with `S_1 = 0`, `S_{i+1} = S_i + T_i`;
    /// zero after the last piece. Step `k` sits at time `k·dt`.
    PiecewiseConstant {
        pieces: Vec<(f64, f64)>,
        dt: f64,
    },
    /// `σ_k = α / ((k + 1)·dt)^{1/(2(n_eff − 1))}`.
    PowerLaw {
        alpha: f64,
        dt: f64,
        n_eff: usize,
    },
    /// Classical annealing `σ(t) = c / √(log(t + 2))`, `t = k·dt`.
    Cdd {
        c: f64,
        dt: f64,
    },
}

impl DiffusionSchedule {
    /// Power law with `n_eff` set to the largest row dimension of `dims`.
    pub fn power_law_for(alpha: f64, dt: f64, dims: &[(usize, usize)]) -> Self {
        let n_eff = dims.iter().map(|d| d.0).max().unwrap_or(1);
        DiffusionSchedule::PowerLaw { alpha, dt, n_eff }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be finite and >= 0, got {v}")))
            }
        };
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be finite and > 0, got {v}")))
            }
        };
        match self {
            DiffusionSchedule::Constant { sigma } => finite_nonneg(*sigma, "sigma"),
            DiffusionSchedule::PiecewiseConstant { pieces, dt } => {
                positive(*dt, "dt")?;
                for &(s, t) in pieces {
                    finite_nonneg(s, "piece sigma")?;
                    finite_nonneg(t, "piece duration")?;
                }
                Ok(())
            }
            DiffusionSchedule::PowerLaw { alpha, dt, n_eff } => {
                finite_nonneg(*alpha, "alpha")?;
                positive(*dt, "dt")?;
                if *n_eff < 2 {
                    return Err(Error::config(format!(
                        "power-law schedule needs n_eff >= 2, got {n_eff}"
                    )));
                }
                Ok(())
            }
            DiffusionSchedule::Cdd { c, dt } => {
                finite_nonneg(*c, "c")?;
                positive(*dt, "dt")
            }
        }
    }

    /// True if every step has `σ = 0`.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            DiffusionSchedule::Constant { sigma } => *sigma == 0.0,
            DiffusionSchedule::PiecewiseConstant { pieces, .. } => {
                pieces.iter().all(|&(s, t)| s == 0.0 || t == 0.0)
            }
            DiffusionSchedule::PowerLaw { alpha, .. } => *alpha == 0.0,
            DiffusionSchedule::Cdd { c, .. } => *c == 0.0,
        }
    }

    /// `σ_k` for step `k ≥ 0`.
    pub fn sigma(&self, k: usize) -> Result<f64> {
        self.validate()?;
        Ok(self.sigma_unchecked(k))
    }

    pub(crate) fn sigma_unchecked(&self, k: usize) -> f64 {
        match self {
            DiffusionSchedule::Constant { sigma } => *sigma,
            DiffusionSchedule::PiecewiseConstant { pieces, dt } => {
                let t = k as f64 * dt;
                let mut start = 0.0;
                for &(s, len) in pieces {
                    if t >= start && t < start + len {
                        return s;
                    }
                    start += len;
                }
                0.0
            }
            DiffusionSchedule::PowerLaw { alpha, dt, n_eff } => {
                let exponent = 1.0 / (2.0 * (*n_eff as f64 - 1.0));
                alpha / ((k as f64 + 1.0) * dt).powf(exponent)
            }
            DiffusionSchedule::Cdd { c, dt } => c / (k as f64 * dt + 2.0).ln().sqrt(),
        }
    }
}

/// `σ_k` of `schedule` at step `k`.
pub fn schedule_sigma(schedule: &DiffusionSchedule, k: usize) -> Result<f64> {
    schedule.sigma(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    /// Step length `d_t`.
    pub dt: f64,
    /// Number of steps `K`; the diffusion time is `K·dt`.
    pub num_steps: usize,
    pub schedule: DiffusionSchedule,
    /// Record every `record_stride`-th step (plus the last). Zero records
    /// only the endpoints.
    pub record_stride: usize,
}

impl SdeConfig {
    pub fn new(dt: f64, num_steps: usize, schedule: DiffusionSchedule) -> Self {
        SdeConfig {
            dt,
            num_steps,
            schedule,
            record_stride: 10,
        }
    }

    /// Total diffusion time `K·dt`.
    pub fn diffusion_time(&self) -> f64 {
        self.num_steps as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be > 0, got {}", self.dt)));
        }
        self.schedule.validate()
    }
}

/// `n × p` matrix of i.i.d. `N(0, delta)` entries, determined by `rng`.
pub fn brownian_increment(n: usize, p: usize, delta: f64, rng: &RngStream) -> Result<Matrix> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!(
            "Brownian increment variance must be > 0, got {delta}"
        )));
    }
    Ok(rng.standard_normal_matrix(n, p) * delta.sqrt())
}

/// The tangent-direction matrix `Z` of one step.
pub(crate) fn step_direction(y: &Matrix, g: &Matrix, delta: f64, sigma: f64, db: &Matrix) -> Matrix {
    let drift = g * (-delta);
    if sigma == 0.0 {
        return drift;
    }
    let (n, p) = y.shape();
    let coef = ProjectionCoefficients::default();
    if p == 1 {
        drift + db * sigma
    } else if p == n {
        drift + db * (coef.alpha * sigma)
    } else {
        let projected = db - y * (y.transpose() * db) * coef.beta;
        drift + projected * sigma
    }
}

/// The general-case direction `−δG + σ(I − βYYᵀ)δB`, with no shortcuts.
pub fn step_direction_general(y: &Matrix, g: &Matrix, delta: f64, sigma: f64, db: &Matrix) -> Matrix {
    let n = y.nrows();
    let beta = ProjectionCoefficients::default().beta;
    let proj = Matrix::identity(n, n) - y * y.transpose() * beta;
    g * (-delta) + proj * db * sigma
}

pub(crate) fn sde_step_matrix(y: &Matrix, g: &Matrix, delta: f64, sigma: f64, db: &Matrix) -> Matrix {
    cayley_update(y, &step_direction(y, g, delta, sigma, db))
}

/// Fixed-step Cayley gradient step, `Y⁺ = cayley(Y, Z = −τG)`. This is the
/// curve the local solver searches along.
pub fn gradient_flow_step(y: &Matrix, g: &Matrix, tau: f64) -> Matrix {
    cayley_update(y, &(g * (-tau)))
}

/// One step of the scheme.
pub fn sde_step(
    y: &StiefelPoint,
    g: &Matrix,
    delta: f64,
    sigma: f64,
    db: &Matrix,
) -> Result<StiefelPoint> {
    for (ctx, m) in [("sde_step gradient", g), ("sde_step increment", db)] {
        if m.shape() != y.matrix().shape() {
            return Err(Error::Dimension {
                context: ctx,
                expected: y.matrix().shape(),
                actual: m.shape(),
            });
        }
    }
    Ok(StiefelPoint::from_matrix_unchecked(sde_step_matrix(
        y.matrix(),
        g,
        delta,
        sigma,
        db,
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub objective: f64,
    pub sigma: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Number of QR re-orthonormalizations triggered by drift audits.
    pub reprojections: usize,
}

/// Runs the scheme for `cfg.num_steps` steps from a single-block start.
pub fn sde_simulate(
    y0: &StiefelPoint,
    problem: &dyn Problem,
    cfg: &SdeConfig,
    rng: &RngStream,
) -> Result<(StiefelPoint, Trajectory)> {
    let start = ProductPoint::single(y0.clone());
    let (end, traj) = sde_simulate_product(&start, problem, cfg, rng)?;
    Ok((end.point(0), traj))
}

/// Block-wise scheme on a product of Stiefel manifolds with a shared `σ_k`.
///
/// Step `k` draws all of its increments from stream `rng.step(k)` on the
/// Brownian lane, block after block.
pub fn sde_simulate_product(
    y0: &ProductPoint,
    problem: &dyn Problem,
    cfg: &SdeConfig,
    rng: &RngStream,
) -> Result<(ProductPoint, Trajectory)> {
    cfg.validate()?;
    let dims = problem.block_dims();
    if y0.block_dims() != dims {
        return Err(Error::contract(format!(
            "start point has block dims {:?}, problem expects {:?}",
            y0.block_dims(),
            dims
        )));
    }
    let rng = rng.lane(Lane::Brownian);
    let mut blocks: Vec<Matrix> = y0.blocks().to_vec();
    let mut traj = Trajectory::default();
    let sqrt_dt = cfg.dt.sqrt();

    let record = |traj: &mut Trajectory, k: usize, blocks: &[Matrix], sigma: f64| -> Result<()> {
        let objective = problem.value(blocks);
        if !objective.is_finite() {
            return Err(diverged(k, "non-finite objective", blocks));
        }
        let residual = blocks
            .iter()
            .map(crate::manifold::feasibility_residual)
            .fold(0.0, f64::max);
        traj.records.push(TrajectoryRecord {
            step: k,
            objective,
            sigma,
            residual,
        });
        Ok(())
    };

    let k_total = cfg.num_steps;
    record(&mut traj, 0, &blocks, cfg.schedule.sigma_unchecked(0))?;
    for k in 0..k_total {
        let sigma = cfg.schedule.sigma_unchecked(k);
        let grads = problem.euclidean_gradient(&blocks);
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(diverged(k, "non-finite gradient", &blocks));
        }
        let next: Vec<Matrix> = if sigma == 0.0 {
            blocks
                .iter()
                .zip(&grads)
                .map(|(y, g)| gradient_flow_step(y, g, cfg.dt))
                .collect()
        } else {
            let mut gen = rng.step(k as u64).generator();
            blocks
                .iter()
                .zip(&grads)
                .map(|(y, g)| {
                    let db = fill_standard_normal(&mut gen, y.nrows(), y.ncols()) * sqrt_dt;
                    sde_step_matrix(y, g, cfg.dt, sigma, &db)
                })
                .collect()
        };
        if next.iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(diverged(k, "non-finite iterate", &blocks));
        }
        blocks = next;

        let done = k + 1;
        if done % REPROJECT_EVERY == 0 {
            for b in blocks.iter_mut() {
                if crate::manifold::feasibility_residual(b) > REPROJECT_TOL {
                    *b = qr_retract(b)?.into_matrix();
                    traj.reprojections += 1;
                }
            }
        }
        let stride_hit = cfg.record_stride > 0 && done % cfg.record_stride == 0;
        if stride_hit || done == k_total {
            record(&mut traj, done, &blocks, sigma)?;
        }
    }
    Ok((ProductPoint::from_matrices_unchecked(blocks), traj))
}

fn diverged(step: usize, message: &str, last: &[Matrix]) -> Error {
    Error::Diverged {
        step,
        message: message.to_string(),
        last_finite: Box::new(ProductPoint::from_matrices_unchecked(last.to_vec())),
    }
}
