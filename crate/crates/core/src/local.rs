//! Feasible local solver: curvilinear search along the Cayley curve with
//! alternating Barzilai–Borwein steps and a Zhang–Hager nonmonotone Armijo
//! test, plus the random-restart baseline built on top of it.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iddm::{CycleRecord, RunReport};
use crate::manifold::{
    canonical_gradient_matrix, feasibility_residual, qr_retract, Matrix, ProductPoint,
};
use crate::problem::Problem;
use crate::rng::{Lane, RngStream};
use crate::sde::gradient_flow_step;

/// Backtracking shrink factor for the step size.
const BACKTRACK: f64 = 0.1;
/// Backtracks after which a trial step is accepted regardless.
const MAX_BACKTRACKS: usize = 5;
/// Extra shrinks allowed when a trial point evaluates to a non-finite value.
const MAX_NONFINITE_BACKTRACKS: usize = 30;
/// Stall rule: relative objective change at most this much ...
const STALL_REL_CHANGE: f64 = 1e-12;
/// ... for this many consecutive iterations.
const STALL_ITERS: usize = 5;
const AUDIT_EVERY: usize = 100;
const AUDIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease parameter.
    pub ls_rho: f64,
    /// Zhang–Hager averaging weight of the nonmonotone reference value.
    pub ls_eta: f64,
    pub tau_init: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for LocalSolverConfig {
    fn default() -> Self {
        LocalSolverConfig {
            grad_tol: 1e-6,
            max_iters: 1000,
            ls_rho: 1e-4,
            ls_eta: 0.85,
            tau_init: 1e-3,
            tau_min: 1e-20,
            tau_max: 1e20,
        }
    }
}

impl LocalSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.ls_rho) {
            return Err(Error::config(format!("ls_rho must be in (0,1), got {}", self.ls_rho)));
        }
        if !open_unit(self.ls_eta) {
            return Err(Error::config(format!("ls_eta must be in (0,1), got {}", self.ls_eta)));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau_max) {
            return Err(Error::config("tau bounds must satisfy 0 < tau_min <= tau_max"));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return Err(Error::config("tau_init must be > 0"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::config("grad_tol must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    Stalled,
    MaxIterations,
    /// No iterate improved on the start; the start point was returned.
    NoImprovement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub function_evals: usize,
    pub termination: Termination,
    pub converged: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Frobenius norm of the canonical gradient at the returned point.
    pub grad_norm: f64,
    pub reprojections: usize,
}

struct Eval {
    f: f64,
    grads: Vec<Matrix>,
    canon: Vec<Matrix>,
}

fn evaluate(problem: &dyn Problem, x: &[Matrix]) -> Option<Eval> {
    let (f, grads) = problem.value_and_gradient(x);
    if !f.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return None;
    }
    let canon = x
        .iter()
        .zip(&grads)
        .map(|(xb, gb)| canonical_gradient_matrix(xb, gb))
        .collect();
    Some(Eval { f, grads, canon })
}

fn norm_sq(ms: &[Matrix]) -> f64 {
    ms.iter().map(|m| m.norm_squared()).sum()
}

fn inner(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Minimizes `problem` from `x0` by curvilinear search.
///
/// One step size is shared by all blocks. Returns `x0` unchanged if no
/// iterate ends up below `F(x0)`.
pub fn local_minimize(
    x0: &ProductPoint,
    problem: &dyn Problem,
    cfg: &LocalSolverConfig,
) -> Result<(ProductPoint, SolveStats)> {
    cfg.validate()?;
    if x0.block_dims() != problem.block_dims() {
        return Err(Error::contract(format!(
            "start point has block dims {:?}, problem expects {:?}",
            x0.block_dims(),
            problem.block_dims()
        )));
    }
    let res0 = x0.max_residual();
    if !(res0 <= AUDIT_TOL) {
        return Err(Error::contract(format!(
            "local_minimize: infeasible start (residual {res0:e})"
        )));
    }

    let diverged = |step: usize, x: &[Matrix]| Error::Diverged {
        step,
        message: "non-finite objective or gradient".into(),
        last_finite: Box::new(ProductPoint::from_matrices_unchecked(x.to_vec())),
    };

    let mut x: Vec<Matrix> = x0.blocks().to_vec();
    let mut cur = evaluate(problem, &x).ok_or_else(|| diverged(0, &x))?;
    let f0 = cur.f;
    let mut stats = SolveStats {
        iterations: 0,
        function_evals: 1,
        termination: Termination::MaxIterations,
        converged: false,
        initial_objective: f0,
        final_objective: f0,
        grad_norm: norm_sq(&cur.canon).sqrt(),
        reprojections: 0,
    };
    if stats.grad_norm <= cfg.grad_tol {
        stats.termination = Termination::GradientTolerance;
        stats.converged = true;
        return Ok((x0.clone(), stats));
    }

    let mut tau = cfg.tau_init;
    let mut q = 1.0;
    let mut c_ref = cur.f;
    let mut stall = 0usize;

    for iter in 1..=cfg.max_iters {
        stats.iterations = iter;
        // Slope of F along the curve at τ = 0 is −⟨G, ∇^c F⟩ = −g^c(∇^c F, ∇^c F).
        let deriv = cfg.ls_rho * inner(&cur.grads, &cur.canon);
        let mut nls = 0usize;
        let mut nonfinite = 0usize;
        let (x_new, next) = loop {
            let trial: Vec<Matrix> = x
                .iter()
                .zip(&cur.grads)
                .map(|(xb, gb)| gradient_flow_step(xb, gb, tau))
                .collect();
            stats.function_evals += 1;
            match evaluate(problem, &trial) {
                None => {
                    nonfinite += 1;
                    if nonfinite > MAX_NONFINITE_BACKTRACKS {
                        return Err(diverged(iter, &x));
                    }
                    tau *= BACKTRACK;
                }
                Some(ev) => {
                    if ev.f <= c_ref - tau * deriv || nls >= MAX_BACKTRACKS {
                        break (trial, ev);
                    }
                    tau *= BACKTRACK;
                    nls += 1;
                }
            }
        };

        let s: Vec<Matrix> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<Matrix> = next.canon.iter().zip(&cur.canon).map(|(a, b)| a - b).collect();
        let f_prev = cur.f;
        x = x_new;
        cur = next;

        if iter % AUDIT_EVERY == 0 {
            let mut touched = false;
            for b in x.iter_mut() {
                if feasibility_residual(b) > AUDIT_TOL {
                    *b = qr_retract(b)?.into_matrix();
                    stats.reprojections += 1;
                    touched = true;
                }
            }
            if touched {
                cur = evaluate(problem, &x).ok_or_else(|| diverged(iter, &x))?;
                stats.function_evals += 1;
            }
        }

        stats.grad_norm = norm_sq(&cur.canon).sqrt();
        if stats.grad_norm <= cfg.grad_tol {
            stats.termination = Termination::GradientTolerance;
            stats.converged = true;
            break;
        }

        let rel = (f_prev - cur.f).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        stall = if rel <= STALL_REL_CHANGE { stall + 1 } else { 0 };
        if stall >= STALL_ITERS {
            stats.termination = Termination::Stalled;
            break;
        }

        let ss = norm_sq(&s);
        let sy = inner(&s, &y).abs();
        let yy = norm_sq(&y);
        let bb = if iter % 2 == 0 { ss / sy } else { sy / yy };
        if bb.is_finite() && bb > 0.0 {
            tau = bb;
        }
        tau = tau.clamp(cfg.tau_min, cfg.tau_max);

        let q_prev = q;
        q = cfg.ls_eta * q_prev + 1.0;
        c_ref = (cfg.ls_eta * q_prev * c_ref + cur.f) / q;
    }

    if cur.f > f0 {
        stats.termination = Termination::NoImprovement;
        stats.converged = false;
        stats.final_objective = f0;
        let start = evaluate(problem, x0.blocks()).ok_or_else(|| diverged(0, x0.blocks()))?;
        stats.grad_norm = norm_sq(&start.canon).sqrt();
        return Ok((x0.clone(), stats));
    }
    stats.final_objective = cur.f;
    Ok((ProductPoint::from_matrices_unchecked(x), stats))
}

/// Random-start baseline: `trials` local solves, the first ones from
/// `init_list` (if given) and the rest from random points. Trial `t` draws
/// its start from `rng` on the initial-point lane at cycle `t`.
pub fn rslocal_run(
    problem: &dyn Problem,
    trials: usize,
    cfg: &LocalSolverConfig,
    rng: &RngStream,
    init_list: Option<&[ProductPoint]>,
) -> Result<RunReport> {
    if trials == 0 {
        return Err(Error::config("rslocal needs at least one trial"));
    }
    let started = Instant::now();
    let inits = init_list.unwrap_or(&[]);
    let mut report: Option<RunReport> = None;
    for t in 0..trials {
        let trial_start = Instant::now();
        let x0 = match inits.get(t) {
            Some(p) => p.clone(),
            None => random_start(problem, rng, t as u64)?,
        };
        let start_objective = problem.value(x0.blocks());
        let (x, stats) = local_minimize(&x0, problem, cfg)?;
        let rec = CycleRecord {
            index: t,
            start_objective,
            post_diffusion_objective: start_objective,
            post_local_objective: stats.final_objective,
            local_iterations: stats.iterations,
            wall_seconds: trial_start.elapsed().as_secs_f64(),
            diverged: None,
        };
        match report.as_mut() {
            None => {
                let mut r = RunReport::new("rslocal", x, stats.final_objective, rng.seed);
                r.cycles.push(rec);
                report = Some(r);
            }
            Some(r) => {
                r.incumbent_update(&x, stats.final_objective);
                r.cycles.push(rec);
            }
        }
    }
    let mut report = report.expect("at least one trial");
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// The random start shared by RSlocal trial `index` and IDDM (index 0).
pub fn random_start(problem: &dyn Problem, rng: &RngStream, index: u64) -> Result<ProductPoint> {
    ProductPoint::random(
        problem.block_dims(),
        &rng.lane(Lane::InitialPoint).cycle(index),
    )
}
