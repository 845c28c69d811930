//! Repetition sweeps and their CSV/JSON output.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmKind, ExperimentConfig, Family, InitKind, ProblemRow, RowSource};
use crate::error::{Error, Result};
use crate::iddm::iddm_run;
use crate::local::{local_minimize, random_start, rslocal_run};
use crate::manifold::ProductPoint;
use crate::par;
use crate::problem::Problem;
use crate::problems::{
    biquad_make, biquad_problem, complete_all, cryoem_generate, cryoem_problem, eigs_init,
    handedness_mse, hp1_problem, stability_estimate, stability_problem, CryoEmInstance,
};
use crate::rng::RngStream;

/// A concrete problem for one repetition.
pub struct Instance {
    pub problem: Box<dyn Problem>,
    pub cryo: Option<CryoEmInstance>,
}

impl Instance {
    /// Largest row dimension over the blocks; the `n` of the power law.
    pub fn n_eff(&self) -> usize {
        self.problem
            .block_dims()
            .iter()
            .map(|d| d.0)
            .max()
            .unwrap_or(1)
    }
}

/// Builds the instance of `row` from `rng` (used for the random families).
pub fn build_instance(cfg: &ExperimentConfig, row: &ProblemRow, rng: &RngStream) -> Result<Instance> {
    let plain = |p: Box<dyn Problem>| Instance {
        problem: p,
        cryo: None,
    };
    Ok(match &row.source {
        RowSource::Hp1 => plain(Box::new(hp1_problem(row.n)?)),
        RowSource::Biquad => plain(Box::new(biquad_problem(biquad_make(
            row.n,
            cfg.biquad_case,
            rng,
        )?))),
        RowSource::Graph(g) => plain(Box::new(stability_problem(g))),
        RowSource::CryoGen(p) => {
            let inst = cryoem_generate(row.n, *p, rng)?;
            Instance {
                problem: Box::new(cryoem_problem(&inst)),
                cryo: Some(inst),
            }
        }
        RowSource::CryoFile(inst) => Instance {
            problem: Box::new(cryoem_problem(inst)),
            cryo: Some((**inst).clone()),
        },
    })
}

/// Seed of repetition `rep`.
pub fn rep_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    cfg.seed.wrapping_add(rep as u64)
}

/// The outcome of one algorithm on one instance.
#[derive(Debug, Clone)]
pub struct AlgorithmOutcome {
    pub objective: f64,
    pub point: ProductPoint,
    pub local_iterations: usize,
}

/// Runs `algorithm` with the matched-seed protocol: every algorithm of
/// repetition seed `seed` starts from the same point (random start 0, or the
/// eigenvector initialization).
pub fn run_algorithm(
    cfg: &ExperimentConfig,
    inst: &Instance,
    algorithm: AlgorithmKind,
    seed: u64,
) -> Result<AlgorithmOutcome> {
    let problem = inst.problem.as_ref();
    let rng = RngStream::new(seed);
    let eigs = || -> Result<ProductPoint> {
        let c = inst
            .cryo
            .as_ref()
            .ok_or_else(|| Error::config("eigenvector initialization needs a cryo-EM problem"))?;
        eigs_init(c)
    };
    let x0 = match cfg.init {
        InitKind::Random => random_start(problem, &rng, 0)?,
        InitKind::Eigs => eigs()?,
    };
    let solve = |x: &ProductPoint| -> Result<AlgorithmOutcome> {
        let (point, stats) = local_minimize(x, problem, &cfg.local)?;
        Ok(AlgorithmOutcome {
            objective: stats.final_objective,
            point,
            local_iterations: stats.iterations,
        })
    };
    match algorithm {
        AlgorithmKind::Iddm => {
            let rep = iddm_run(problem, &x0, &cfg.iddm_config(inst.n_eff())?, &rng)?;
            let local_iterations = rep.initial.iter().chain(&rep.cycles).map(|c| c.local_iterations).sum();
            Ok(AlgorithmOutcome {
                objective: rep.best_objective,
                point: rep.best_point,
                local_iterations,
            })
        }
        AlgorithmKind::RsLocal => {
            let rep = rslocal_run(
                problem,
                cfg.cycles,
                &cfg.local,
                &rng,
                Some(std::slice::from_ref(&x0)),
            )?;
            Ok(AlgorithmOutcome {
                objective: rep.best_objective,
                point: rep.best_point,
                local_iterations: rep.cycles.iter().map(|c| c.local_iterations).sum(),
            })
        }
        AlgorithmKind::Local => solve(&x0),
        AlgorithmKind::Eigs => {
            let point = eigs()?;
            Ok(AlgorithmOutcome {
                objective: problem.value(point.blocks()),
                point,
                local_iterations: 0,
            })
        }
        AlgorithmKind::EigsLocal => solve(&eigs()?),
    }
}

/// The reported quantity: the objective, the stability number for graphs,
/// or the rotation MSE for cryo-EM.
pub fn reported_value(family: Family, inst: &Instance, out: &AlgorithmOutcome) -> Result<f64> {
    match family {
        Family::Hp1 | Family::Biquad => Ok(out.objective),
        Family::Stability => Ok(stability_estimate(out.objective)? as f64),
        Family::CryoEm => {
            let truth = &inst
                .cryo
                .as_ref()
                .expect("cryo-EM rows carry their instance")
                .true_rotations;
            handedness_mse(&complete_all(&out.point)?, truth)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub problem: String,
    pub n: usize,
    pub param: String,
    pub algorithm: String,
    pub rep: usize,
    pub seed: u64,
    pub objective: f64,
    pub value: f64,
    pub local_iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub n: usize,
    pub param: String,
    pub algorithm: String,
    pub reps: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Statistics of `value − best value of the row over all algorithms`.
    pub gap_min: f64,
    pub gap_mean: f64,
    pub gap_max: f64,
    /// Mean wall-clock seconds per repetition.
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub config: Vec<(String, String)>,
    pub rows: Vec<SummaryRow>,
    /// Sorted by row, algorithm (config order) and repetition.
    pub records: Vec<RepRecord>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn mean(xs: &[f64]) -> f64 {
    par::pairwise_sum(xs) / xs.len() as f64
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Builds the instances a run needs: one per row, or one per row and
/// repetition.
fn build_instances(cfg: &ExperimentConfig, rows: &[ProblemRow]) -> Result<Vec<Vec<Instance>>> {
    let per_rep = cfg.uses_per_rep_instance();
    let per_row = if per_rep { cfg.reps } else { 1 };
    let flat = par::map_range(rows.len() * per_row, |i| {
        let (ri, r) = (i / per_row, i % per_row);
        let base = if per_rep { rep_seed(cfg, r) } else { cfg.seed };
        build_instance(cfg, &rows[ri], &RngStream::new(base).run(ri as u64))
    });
    let mut out: Vec<Vec<Instance>> = (0..rows.len()).map(|_| Vec::new()).collect();
    for (i, inst) in flat.into_iter().enumerate() {
        out[i / per_row].push(inst?);
    }
    Ok(out)
}

/// Instance used by repetition `rep` of row `ri`.
fn instance_for(instances: &[Vec<Instance>], ri: usize, rep: usize) -> &Instance {
    let v = &instances[ri];
    &v[rep.min(v.len() - 1)]
}

/// Runs every (row, algorithm, repetition) of `cfg`. Repetition `r` uses seed
/// `cfg.seed + r`. Configuration errors surface before any run starts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let rows = cfg.prepare()?;
    let instances = build_instances(cfg, &rows)?;
    let algs = &cfg.algorithms;
    let per_row = algs.len() * cfg.reps;
    let results = par::map_range(rows.len() * per_row, |i| -> Result<RepRecord> {
        let ri = i / per_row;
        let (ai, rep) = ((i % per_row) / cfg.reps, i % cfg.reps);
        let row = &rows[ri];
        let inst = instance_for(&instances, ri, rep);
        let seed = rep_seed(cfg, rep);
        let t = Instant::now();
        let out = run_algorithm(cfg, inst, algs[ai], seed)?;
        let wall_seconds = t.elapsed().as_secs_f64();
        Ok(RepRecord {
            problem: cfg.family.to_string(),
            n: row.n,
            param: row.param.clone(),
            algorithm: algs[ai].to_string(),
            rep,
            seed,
            objective: out.objective,
            value: reported_value(cfg.family, inst, &out)?,
            local_iterations: out.local_iterations,
            wall_seconds,
        })
    });
    let records: Vec<RepRecord> = results.into_iter().collect::<Result<_>>()?;
    Ok(ResultsTable {
        config: cfg.to_pairs(),
        rows: summarize(&records, rows.len(), algs.len(), cfg.reps),
        records,
    })
}

fn summarize(records: &[RepRecord], rows: usize, algs: usize, reps: usize) -> Vec<SummaryRow> {
    let mut out = Vec::with_capacity(rows * algs);
    for row in records.chunks(algs * reps).take(rows) {
        let best = row.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        for group in row.chunks(reps) {
            let values: Vec<f64> = group.iter().map(|r| r.value).collect();
            let gaps: Vec<f64> = values.iter().map(|v| v - best).collect();
            let secs: Vec<f64> = group.iter().map(|r| r.wall_seconds).collect();
            let (min, max) = min_max(&values);
            let (gap_min, gap_max) = min_max(&gaps);
            let first = &group[0];
            out.push(SummaryRow {
                problem: first.problem.clone(),
                n: first.n,
                param: first.param.clone(),
                algorithm: first.algorithm.clone(),
                reps: group.len(),
                min,
                mean: mean(&values).clamp(min, max),
                max,
                gap_min,
                gap_mean: mean(&gaps).clamp(gap_min, gap_max),
                gap_max,
                cpu_seconds: mean(&secs),
            });
        }
    }
    out
}

impl ResultsTable {
    /// Per-repetition CSV. Carries no timings, so equal configs give
    /// byte-identical files.
    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "problem",
            "n",
            "param",
            "algorithm",
            "rep",
            "seed",
            "objective",
            "value",
            "local_iterations",
        ])?;
        for r in &self.records {
            w.write_record([
                r.problem.clone(),
                r.n.to_string(),
                r.param.clone(),
                r.algorithm.clone(),
                r.rep.to_string(),
                r.seed.to_string(),
                fmt_f64(r.objective),
                fmt_f64(r.value),
                r.local_iterations.to_string(),
            ])?;
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "problem",
            "n",
            "param",
            "algorithm",
            "reps",
            "min",
            "mean",
            "max",
            "gap_min",
            "gap_mean",
            "gap_max",
            "cpu_seconds",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.problem.clone(),
                r.n.to_string(),
                r.param.clone(),
                r.algorithm.clone(),
                r.reps.to_string(),
                fmt_f64(r.min),
                fmt_f64(r.mean),
                fmt_f64(r.max),
                fmt_f64(r.gap_min),
                fmt_f64(r.gap_mean),
                fmt_f64(r.gap_max),
                fmt_f64(r.cpu_seconds),
            ])?;
        }
        finish(w)
    }

    pub fn to_json(&self) -> Result<String> {
        let config: serde_json::Map<String, serde_json::Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "config": config,
            "summary": self.rows,
            "runs": self.records,
        }))?)
    }

    /// Writes `runs.csv`, `summary.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv()?)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv()?)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }

    /// Fixed-width text table of the summary rows.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<10} {:>5} {:<16} {:<10} {:>10} {:>10} {:>10} {:>9}\n",
            "problem", "n", "param", "algorithm", "min", "mean", "max", "cpu (s)"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:>5} {:<16} {:<10} {:>10.3e} {:>10.3e} {:>10.3e} {:>9.3}\n",
                r.problem, r.n, r.param, r.algorithm, r.min, r.mean, r.max, r.cpu_seconds
            ));
        }
        s
    }

    /// The summary row of `algorithm` for problem size `n`.
    pub fn row(&self, n: usize, algorithm: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.n == n && r.algorithm == algorithm)
    }

    /// Reported values of `algorithm` for problem size `n`, by repetition.
    pub fn values(&self, n: usize, algorithm: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.n == n && r.algorithm == algorithm)
            .map(|r| r.value)
            .collect()
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        for kv in [
            format!("problem.family = {family}"),
            "problem.n = 6".into(),
            "reps = 3".into(),
            "algo.cycles = 2".into(),
            "sde.steps = 20".into(),
            "seed = 11".into(),
        ] {
            cfg.apply(&kv).unwrap();
        }
        cfg
    }

    #[test]
    fn same_config_same_csv() {
        let cfg = small("hp1");
        let a = run_experiment(&cfg).unwrap();
        let b = par::sequential(|| run_experiment(&cfg).unwrap());
        assert_eq!(a.runs_csv().unwrap(), b.runs_csv().unwrap());
        assert_eq!(a.records.len(), 6);
    }

    #[test]
    fn summary_recomputes_from_records() {
        let t = run_experiment(&small("biquad")).unwrap();
        for row in &t.rows {
            let v = t.values(row.n, &row.algorithm);
            assert_eq!(row.reps, v.len());
            assert!(row.min <= row.mean && row.mean <= row.max);
            assert_eq!(row.min, v.iter().cloned().fold(f64::INFINITY, f64::min));
            assert_eq!(row.max, v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            assert!(row.cpu_seconds >= 0.0);
        }
        let best = t.records.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        assert_eq!(t.rows.iter().map(|r| r.gap_min).fold(f64::INFINITY, f64::min), 0.0);
        assert!(best.is_finite());
    }

    #[test]
    fn rslocal_never_worse_than_local_with_matched_seeds() {
        let mut cfg = small("hp1");
        cfg.apply("algo.kind = local,rslocal").unwrap();
        let t = run_experiment(&cfg).unwrap();
        let local = t.values(6, "local");
        let rs = t.values(6, "rslocal");
        for (l, r) in local.iter().zip(&rs) {
            assert!(r <= l);
        }
    }

    #[test]
    fn csv_floats_roundtrip() {
        let t = run_experiment(&small("hp1")).unwrap();
        let csv = t.runs_csv().unwrap();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        for (rec, r) in rdr.records().zip(&t.records) {
            let rec = rec.unwrap();
            assert_eq!(rec[6].parse::<f64>().unwrap(), r.objective);
        }
    }
}
