//! Intermittent diminishing diffusion: alternate a diffusion cycle with a
//! local solve and keep the best point seen.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{local_minimize, LocalSolverConfig};
use crate::manifold::ProductPoint;
use crate::problem::Problem;
use crate::rng::RngStream;
use crate::sde::{sde_simulate_product, SdeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IddmConfig {
    pub num_cycles: usize,
    /// Diffusion settings of one cycle; the schedule restarts every cycle.
    pub sde: SdeConfig,
    pub local: LocalSolverConfig,
    /// `true`: cycle k diffuses from the previous cycle's local solution.
    /// `false`: it diffuses from the incumbent instead.
    pub keep_incumbent_start: bool,
    /// Local solve from `X0` before the first cycle.
    pub initial_local_solve: bool,
    /// Stop after this many consecutive cycles without improvement.
    pub no_improvement_stop: Option<usize>,
}

impl IddmConfig {
    pub fn new(num_cycles: usize, sde: SdeConfig, local: LocalSolverConfig) -> Self {
        IddmConfig {
            num_cycles,
            sde,
            local,
            keep_incumbent_start: true,
            initial_local_solve: true,
            no_improvement_stop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cycles == 0 {
            return Err(Error::config("num_cycles must be >= 1"));
        }
        if self.no_improvement_stop == Some(0) {
            return Err(Error::config("no_improvement_stop must be >= 1"));
        }
        self.sde.validate()?;
        self.local.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub index: usize,
    pub start_objective: f64,
    pub post_diffusion_objective: f64,
    pub post_local_objective: f64,
    pub local_iterations: usize,
    pub wall_seconds: f64,
    /// Set when the cycle diverged and was skipped.
    pub diverged: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub best_objective: f64,
    pub best_point: ProductPoint,
    /// The local solve from `X0`, if one was made.
    pub initial: Option<CycleRecord>,
    pub cycles: Vec<CycleRecord>,
    pub seed: u64,
    pub wall_seconds: f64,
    pub config: serde_json::Value,
}

impl RunReport {
    pub fn new(algorithm: &str, point: ProductPoint, objective: f64, seed: u64) -> Self {
        RunReport {
            algorithm: algorithm.to_string(),
            best_objective: objective,
            best_point: point,
            initial: None,
            cycles: Vec::new(),
            seed,
            wall_seconds: 0.0,
            config: serde_json::Value::Null,
        }
    }

    /// Replaces the incumbent iff `value` is strictly smaller. Returns
    /// whether it did.
    pub fn incumbent_update(&mut self, candidate: &ProductPoint, value: f64) -> bool {
        if value < self.best_objective {
            self.best_objective = value;
            self.best_point = candidate.clone();
            true
        } else {
            false
        }
    }
}

/// Owned form of [`RunReport::incumbent_update`].
pub fn incumbent_update(mut report: RunReport, candidate: &ProductPoint, value: f64) -> RunReport {
    report.incumbent_update(candidate, value);
    report
}

/// Runs IDDM from `x0`. Cycle `k` (1-based) draws its Brownian path from
/// `rng.cycle(k)`.
pub fn iddm_run(
    problem: &dyn Problem,
    x0: &ProductPoint,
    cfg: &IddmConfig,
    rng: &RngStream,
) -> Result<RunReport> {
    cfg.validate()?;
    if x0.block_dims() != problem.block_dims() {
        return Err(Error::contract(format!(
            "start point has block dims {:?}, problem expects {:?}",
            x0.block_dims(),
            problem.block_dims()
        )));
    }
    let started = Instant::now();
    let f0 = problem.value(x0.blocks());
    let mut report = RunReport::new("iddm", x0.clone(), f0, rng.seed);
    report.config = serde_json::to_value(cfg)?;

    let mut xk = x0.clone();
    if cfg.initial_local_solve {
        let t = Instant::now();
        let (x1, stats) = local_minimize(x0, problem, &cfg.local)?;
        report.initial = Some(CycleRecord {
            index: 0,
            start_objective: f0,
            post_diffusion_objective: f0,
            post_local_objective: stats.final_objective,
            local_iterations: stats.iterations,
            wall_seconds: t.elapsed().as_secs_f64(),
            diverged: None,
        });
        report.incumbent_update(&x1, stats.final_objective);
        xk = x1;
    }

    let skip_diffusion = cfg.sde.schedule.is_identically_zero() || cfg.sde.num_steps == 0;
    let mut stale = 0usize;
    for k in 1..=cfg.num_cycles {
        let t = Instant::now();
        let start = if cfg.keep_incumbent_start {
            xk.clone()
        } else {
            report.best_point.clone()
        };
        let start_objective = problem.value(start.blocks());
        let mut rec = CycleRecord {
            index: k,
            start_objective,
            post_diffusion_objective: start_objective,
            post_local_objective: start_objective,
            local_iterations: 0,
            wall_seconds: 0.0,
            diverged: None,
        };

        let diffused = if skip_diffusion {
            Ok(start)
        } else {
            sde_simulate_product(&start, problem, &cfg.sde, &rng.cycle(k as u64)).map(|(x, _)| x)
        };
        let outcome = diffused.and_then(|x| {
            rec.post_diffusion_objective = problem.value(x.blocks());
            local_minimize(&x, problem, &cfg.local)
        });
        let improved = match outcome {
            Ok((x, stats)) => {
                rec.post_local_objective = stats.final_objective;
                rec.local_iterations = stats.iterations;
                let improved = report.incumbent_update(&x, stats.final_objective);
                xk = x;
                improved
            }
            Err(e @ Error::Diverged { .. }) => {
                rec.diverged = Some(e.to_string());
                false
            }
            Err(e) => return Err(e),
        };
        rec.wall_seconds = t.elapsed().as_secs_f64();
        report.cycles.push(rec);

        stale = if improved { 0 } else { stale + 1 };
        if cfg.no_improvement_stop.is_some_and(|m| stale >= m) {
            break;
        }
    }
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Matrix, StiefelPoint};
    use crate::problem::FnProblem;
    use crate::sde::DiffusionSchedule;

    fn point(v: &[f64]) -> ProductPoint {
        let m = Matrix::from_column_slice(v.len(), 1, v);
        ProductPoint::single(StiefelPoint::new(&m / m.norm()).unwrap())
    }

    #[test]
    fn strict_improvement_only() {
        let a = point(&[1.0, 0.0]);
        let b = point(&[0.0, 1.0]);
        let r = RunReport::new("t", a.clone(), 2.0, 0);
        let r = incumbent_update(r, &b, 2.0);
        assert_eq!(r.best_point, a);
        let r = incumbent_update(r, &b, 1.0);
        assert_eq!(r.best_point, b);
        assert_eq!(r.best_objective, 1.0);
    }

    #[test]
    fn sequence_keeps_minimum() {
        let mut r = RunReport::new("t", point(&[1.0, 0.0]), f64::INFINITY, 0);
        for v in [3.0, 1.0, 2.0] {
            r.incumbent_update(&point(&[1.0, v]), v);
        }
        assert_eq!(r.best_objective, 1.0);
    }

    #[test]
    fn zero_cycles_rejected() {
        let prob = FnProblem::rayleigh(vec![1.0, 2.0]);
        let cfg = IddmConfig::new(
            0,
            SdeConfig::new(0.1, 10, DiffusionSchedule::Constant { sigma: 0.0 }),
            LocalSolverConfig::default(),
        );
        assert!(matches!(
            iddm_run(&prob, &point(&[1.0, 1.0]), &cfg, &RngStream::new(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rayleigh_reaches_minimum_for_any_sigma() {
        let prob = FnProblem::rayleigh(vec![4.0, 1.0, 3.0, 2.0, 5.0]);
        for sigma in [0.0, 0.1, 0.5] {
            let cfg = IddmConfig::new(
                3,
                SdeConfig::new(0.01, 200, DiffusionSchedule::Constant { sigma }),
                LocalSolverConfig::default(),
            );
            let rep = iddm_run(&prob, &point(&[1.0, 0.1, 1.0, 1.0, 1.0]), &cfg, &RngStream::new(3))
                .unwrap();
            assert!((rep.best_objective - 1.0).abs() <= 1e-8, "sigma {sigma}: {}", rep.best_objective);
            assert_eq!(rep.cycles.len(), 3);
        }
    }

    #[test]
    fn early_stop_after_stale_cycles() {
        let prob = FnProblem::rayleigh(vec![1.0, 2.0, 3.0]);
        let mut cfg = IddmConfig::new(
            10,
            SdeConfig::new(0.01, 10, DiffusionSchedule::Constant { sigma: 0.0 }),
            LocalSolverConfig::default(),
        );
        cfg.no_improvement_stop = Some(2);
        let rep = iddm_run(&prob, &point(&[1.0, 1.0, 1.0]), &cfg, &RngStream::new(0)).unwrap();
        assert_eq!(rep.cycles.len(), 2);
    }
}
