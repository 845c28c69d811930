//! Initial diffusion strength sweep: `−log₁₀(F_IDDM / F_RSlocal)` over
//! problem rows and power-law strengths `α`.

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmKind, ExperimentConfig, ScheduleKind};
use super::run::{build_instance, rep_seed, run_algorithm};
use crate::error::{Error, Result};
use crate::manifold::Matrix;
use crate::par;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSweep {
    /// `(n, param)` of every row.
    pub rows: Vec<(usize, String)>,
    pub sigma: Vec<f64>,
    /// Mean RSlocal objective of every row.
    pub rslocal_mean: Vec<f64>,
    /// Mean IDDM objective, rows × sigma, row-major.
    pub iddm_mean: Vec<f64>,
}

/// Floor applied to both means so the log ratio stays finite when a solver
/// hits an exact zero.
const MEAN_FLOOR: f64 = f64::MIN_POSITIVE;

impl SigmaSweep {
    /// `−log₁₀(F_IDDM / F_RSlocal)`; positive where IDDM wins.
    pub fn log_ratio(&self) -> Matrix {
        let cols = self.sigma.len();
        Matrix::from_fn(self.rows.len(), cols, |i, j| {
            let rs = self.rslocal_mean[i].max(MEAN_FLOOR);
            let id = self.iddm_mean[i * cols + j].max(MEAN_FLOOR);
            -(id / rs).log10()
        })
    }

    /// Header `n,param,<σ…>`, one line per row.
    pub fn to_csv(&self) -> Result<String> {
        let m = self.log_ratio();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string(), "param".to_string()];
        header.extend(self.sigma.iter().map(|s| format!("{s:?}")));
        w.write_record(&header)?;
        for (i, (n, param)) in self.rows.iter().enumerate() {
            let mut rec = vec![n.to_string(), param.clone()];
            rec.extend((0..self.sigma.len()).map(|j| format!("{:?}", m[(i, j)])));
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// For every row of `cfg`, runs `cfg.reps` RSlocal repetitions and, for each
/// `α` in `sigma_grid`, `cfg.reps` IDDM repetitions with the power law of
/// strength `α`. Repetition `r` of both uses seed `cfg.seed + r`.
pub fn sweep_sigma(cfg: &ExperimentConfig, sigma_grid: &[f64]) -> Result<SigmaSweep> {
    if sigma_grid.is_empty() {
        return Err(Error::config("sigma grid is empty"));
    }
    if let Some(s) = sigma_grid.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::config(format!("sigma grid values must be finite and >= 0, got {s}")));
    }
    if cfg.schedule != ScheduleKind::PowerLaw {
        return Err(Error::config("sweep-sigma varies the power-law strength; set sde.schedule = power_law"));
    }
    let rows = cfg.prepare()?;
    let reps = cfg.reps;
    let cols = sigma_grid.len();
    // Column 0 is RSlocal, column j+1 is IDDM with sigma_grid[j].
    let per_row = (cols + 1) * reps;
    let results = par::map_range(rows.len() * per_row, |i| -> Result<f64> {
        let ri = i / per_row;
        let (c, rep) = ((i % per_row) / reps, i % reps);
        let base = if cfg.uses_per_rep_instance() {
            rep_seed(cfg, rep)
        } else {
            cfg.seed
        };
        let inst = build_instance(cfg, &rows[ri], &RngStream::new(base).run(ri as u64))?;
        let seed = rep_seed(cfg, rep);
        let out = if c == 0 {
            run_algorithm(cfg, &inst, AlgorithmKind::RsLocal, seed)?
        } else {
            let mut cell = cfg.clone();
            cell.alpha = Some(sigma_grid[c - 1]);
            run_algorithm(&cell, &inst, AlgorithmKind::Iddm, seed)?
        };
        Ok(out.objective)
    });
    let values: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let mut rslocal_mean = Vec::with_capacity(rows.len());
    let mut iddm_mean = Vec::with_capacity(rows.len() * cols);
    for row in values.chunks(per_row) {
        let mut groups = row.chunks(reps).map(|g| par::pairwise_sum(g) / reps as f64);
        rslocal_mean.push(groups.next().expect("rslocal group"));
        iddm_mean.extend(groups);
    }
    let sweep = SigmaSweep {
        rows: rows.iter().map(|r| (r.n, r.param.clone())).collect(),
        sigma: sigma_grid.to_vec(),
        rslocal_mean,
        iddm_mean,
    };
    if sweep.log_ratio().iter().any(|v| !v.is_finite()) {
        return Err(Error::Initialization(
            "sweep produced a non-finite objective mean".into(),
        ));
    }
    Ok(sweep)
}
