//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::iddm::IddmConfig;
use crate::local::LocalSolverConfig;
use crate::problems::{parse_dimacs, BiquadCase, CryoEmInstance, Graph};
use crate::sde::{DiffusionSchedule, SdeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hp1,
    Biquad,
    Stability,
    CryoEm,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hp1" => Ok(Family::Hp1),
            "biquad" => Ok(Family::Biquad),
            "stability" => Ok(Family::Stability),
            "cryoem" => Ok(Family::CryoEm),
            _ => Err(Error::config(format!(
                "unknown problem family '{s}' (expected hp1, biquad, stability or cryoem)"
            ))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Hp1 => "hp1",
            Family::Biquad => "biquad",
            Family::Stability => "stability",
            Family::CryoEm => "cryoem",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Iddm,
    RsLocal,
    Local,
    /// The eigenvector initialization alone (cryo-EM only).
    Eigs,
    /// One local solve from the eigenvector initialization (cryo-EM only).
    EigsLocal,
}

impl FromStr for AlgorithmKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iddm" => Ok(AlgorithmKind::Iddm),
            "rslocal" => Ok(AlgorithmKind::RsLocal),
            "local" => Ok(AlgorithmKind::Local),
            "eigs" => Ok(AlgorithmKind::Eigs),
            "eigs+local" => Ok(AlgorithmKind::EigsLocal),
            _ => Err(Error::config(format!(
                "unknown algorithm '{s}' (expected iddm, rslocal, local, eigs or eigs+local)"
            ))),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Iddm => "iddm",
            AlgorithmKind::RsLocal => "rslocal",
            AlgorithmKind::Local => "local",
            AlgorithmKind::Eigs => "eigs",
            AlgorithmKind::EigsLocal => "eigs+local",
        })
    }
}

/// Where runs start: a random point, or the eigenvector initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Random,
    Eigs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    PowerLaw,
    Constant,
    Cdd,
}

/// A graph named on the command line or in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSpec {
    Cycle(usize),
    Complete(usize),
    Empty(usize),
    Petersen,
    Hamming(u32, u32),
    File(PathBuf),
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph> {
        match self {
            GraphSpec::Cycle(m) => Graph::cycle(*m),
            GraphSpec::Complete(m) => Ok(Graph::complete(*m)),
            GraphSpec::Empty(m) => Ok(Graph::empty(*m)),
            GraphSpec::Petersen => Ok(Graph::petersen()),
            GraphSpec::Hamming(d, t) => Graph::hamming(*d, *t),
            GraphSpec::File(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::config(format!("cannot read graph file {}: {e}", p.display()))
                })?;
                parse_dimacs(&text)
            }
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::config(format!(
                "bad graph '{s}' (expected cycle:M, complete:M, empty:M, petersen, hamming:D:T or file:PATH)"
            ))
        };
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(GraphSpec::File(PathBuf::from(path)));
        }
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<usize> {
            parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        match (parts[0], parts.len()) {
            ("cycle", 2) => Ok(GraphSpec::Cycle(num(1)?)),
            ("complete", 2) => Ok(GraphSpec::Complete(num(1)?)),
            ("empty", 2) => Ok(GraphSpec::Empty(num(1)?)),
            ("petersen", 1) => Ok(GraphSpec::Petersen),
            ("hamming", 3) => Ok(GraphSpec::Hamming(num(1)? as u32, num(2)? as u32)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Cycle(m) => write!(f, "cycle:{m}"),
            GraphSpec::Complete(m) => write!(f, "complete:{m}"),
            GraphSpec::Empty(m) => write!(f, "empty:{m}"),
            GraphSpec::Petersen => write!(f, "petersen"),
            GraphSpec::Hamming(d, t) => write!(f, "hamming:{d}:{t}"),
            GraphSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Everything a run depends on. Two runs with equal configs produce equal
/// per-repetition results.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    /// Problem sizes: `n` for hp1 and biquad, the number of images for
    /// cryo-EM. Unused for stability.
    pub n: Vec<usize>,
    pub biquad_case: BiquadCase,
    pub graphs: Vec<GraphSpec>,
    pub corruption: Vec<f64>,
    /// Cryo-EM instance file; replaces generated instances.
    pub instance_file: Option<PathBuf>,
    /// Draw a new instance per repetition. `None` picks the family default:
    /// shared for biquad, per repetition for cryo-EM.
    pub per_rep_instance: Option<bool>,
    pub algorithms: Vec<AlgorithmKind>,
    /// IDDM cycles and RSlocal trials.
    pub cycles: usize,
    pub init: InitKind,
    pub schedule: ScheduleKind,
    /// Power-law strength; `None` means `1/n_eff`.
    pub alpha: Option<f64>,
    pub sigma: f64,
    pub cdd_c: f64,
    pub dt: f64,
    pub steps: usize,
    pub local: LocalSolverConfig,
    pub keep_incumbent_start: bool,
    pub initial_local_solve: bool,
    pub no_improvement_stop: Option<usize>,
    pub seed: u64,
    pub reps: usize,
    pub out_dir: Option<PathBuf>,
    /// Initial diffusion strengths for `sweep-sigma`.
    pub sigma_grid: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::Hp1,
            n: vec![20],
            biquad_case: BiquadCase::Alternating,
            graphs: vec![GraphSpec::Cycle(5)],
            corruption: vec![0.0],
            instance_file: None,
            per_rep_instance: None,
            algorithms: vec![AlgorithmKind::Iddm, AlgorithmKind::RsLocal],
            cycles: 10,
            init: InitKind::Random,
            schedule: ScheduleKind::PowerLaw,
            alpha: None,
            sigma: 0.1,
            cdd_c: 0.1,
            dt: 0.1,
            steps: 100,
            local: LocalSolverConfig::default(),
            keep_incumbent_start: true,
            initial_local_solve: true,
            no_improvement_stop: None,
            seed: 0,
            reps: 50,
            out_dir: None,
            sigma_grid: vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let out: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::config(format!("{key}: empty list")));
    }
    Ok(out)
}

/// `a,b,c` or an inclusive range `start:stop:step`.
fn parse_sizes(key: &str, v: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    match parts.len() {
        1 => parse_list(key, v),
        3 => {
            let (a, b, s): (usize, usize, usize) = (
                parse_num(key, parts[0])?,
                parse_num(key, parts[1])?,
                parse_num(key, parts[2])?,
            );
            if s == 0 || a > b {
                return Err(Error::config(format!("{key}: bad range '{v}'")));
            }
            Ok((a..=b).step_by(s).collect())
        }
        _ => Err(Error::config(format!("{key}: bad size list '{v}'"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses a config file on top of the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.apply(line).map_err(|e| match e {
                Error::Config(m) => Error::Parse {
                    line: i + 1,
                    message: m,
                },
                e => e,
            })?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got '{assignment}'")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "problem.family" => self.family = v.parse()?,
            "problem.n" => self.n = parse_sizes(key, v)?,
            "problem.case" => {
                self.biquad_case = match v {
                    "i" => BiquadCase::Alternating,
                    "ii" => BiquadCase::Sparse {
                        eta: match self.biquad_case {
                            BiquadCase::Sparse { eta } => eta,
                            BiquadCase::Alternating => BiquadCase::DEFAULT_ETA,
                        },
                    },
                    _ => return Err(Error::config(format!("{key}: expected i or ii, got '{v}'"))),
                }
            }
            "problem.eta" => {
                self.biquad_case = BiquadCase::Sparse {
                    eta: parse_num(key, v)?,
                }
            }
            "problem.graph" => {
                self.graphs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
                if self.graphs.is_empty() {
                    return Err(Error::config(format!("{key}: empty list")));
                }
            }
            "problem.corruption" => self.corruption = parse_list(key, v)?,
            "problem.instance_file" => self.instance_file = Some(PathBuf::from(v)),
            "problem.instance" => {
                self.per_rep_instance = match v {
                    "shared" => Some(false),
                    "per_rep" => Some(true),
                    _ => {
                        return Err(Error::config(format!(
                            "{key}: expected shared or per_rep, got '{v}'"
                        )))
                    }
                }
            }
            "algo.kind" => self.algorithms = parse_list(key, v)?,
            "algo.cycles" => self.cycles = parse_num(key, v)?,
            "algo.init" => {
                self.init = match v {
                    "random" => InitKind::Random,
                    "eigs" => InitKind::Eigs,
                    _ => return Err(Error::config(format!("{key}: expected random or eigs, got '{v}'"))),
                }
            }
            "sde.schedule" => {
                self.schedule = match v {
                    "power_law" => ScheduleKind::PowerLaw,
                    "constant" => ScheduleKind::Constant,
                    "cdd" => ScheduleKind::Cdd,
                    _ => {
                        return Err(Error::config(format!(
                            "{key}: expected power_law, constant or cdd, got '{v}'"
                        )))
                    }
                }
            }
            "sde.alpha" => {
                self.alpha = if v == "auto" {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "sde.sigma" => self.sigma = parse_num(key, v)?,
            "sde.c" => self.cdd_c = parse_num(key, v)?,
            "sde.dt" => self.dt = parse_num(key, v)?,
            "sde.steps" => self.steps = parse_num(key, v)?,
            "local.grad_tol" => self.local.grad_tol = parse_num(key, v)?,
            "local.max_iters" => self.local.max_iters = parse_num(key, v)?,
            "iddm.keep_incumbent_start" => self.keep_incumbent_start = parse_bool(key, v)?,
            "iddm.initial_local_solve" => self.initial_local_solve = parse_bool(key, v)?,
            "iddm.no_improvement_stop" => {
                self.no_improvement_stop = if v == "none" {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "reps" => self.reps = parse_num(key, v)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(v)),
            "sweep.sigma" => self.sigma_grid = parse_list(key, v)?,
            _ => return Err(Error::config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// The configuration as `key=value` lines; [`ExperimentConfig::parse`]
    /// reads it back to an equal config.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = vec![
            ("problem.family", self.family.to_string()),
            ("problem.n", join(&self.n)),
        ];
        match self.biquad_case {
            BiquadCase::Alternating => out.push(("problem.case", "i".into())),
            BiquadCase::Sparse { eta } => {
                out.push(("problem.case", "ii".into()));
                out.push(("problem.eta", format!("{eta:?}")));
            }
        }
        out.push(("problem.graph", join(&self.graphs)));
        out.push(("problem.corruption", join_f64(&self.corruption)));
        if let Some(p) = &self.instance_file {
            out.push(("problem.instance_file", p.display().to_string()));
        }
        if let Some(per_rep) = self.per_rep_instance {
            out.push((
                "problem.instance",
                if per_rep { "per_rep" } else { "shared" }.into(),
            ));
        }
        out.push(("algo.kind", join(&self.algorithms)));
        out.push(("algo.cycles", self.cycles.to_string()));
        out.push((
            "algo.init",
            match self.init {
                InitKind::Random => "random",
                InitKind::Eigs => "eigs",
            }
            .into(),
        ));
        out.push((
            "sde.schedule",
            match self.schedule {
                ScheduleKind::PowerLaw => "power_law",
                ScheduleKind::Constant => "constant",
                ScheduleKind::Cdd => "cdd",
            }
            .into(),
        ));
        out.push((
            "sde.alpha",
            self.alpha.map_or("auto".into(), |a| format!("{a:?}")),
        ));
        out.push(("sde.sigma", format!("{:?}", self.sigma)));
        out.push(("sde.c", format!("{:?}", self.cdd_c)));
        out.push(("sde.dt", format!("{:?}", self.dt)));
        out.push(("sde.steps", self.steps.to_string()));
        out.push(("local.grad_tol", format!("{:?}", self.local.grad_tol)));
        out.push(("local.max_iters", self.local.max_iters.to_string()));
        out.push(("iddm.keep_incumbent_start", self.keep_incumbent_start.to_string()));
        out.push(("iddm.initial_local_solve", self.initial_local_solve.to_string()));
        out.push((
            "iddm.no_improvement_stop",
            self.no_improvement_stop.map_or("none".into(), |m| m.to_string()),
        ));
        out.push(("seed", self.seed.to_string()));
        out.push(("reps", self.reps.to_string()));
        if let Some(p) = &self.out_dir {
            out.push(("out_dir", p.display().to_string()));
        }
        out.push(("sweep.sigma", join_f64(&self.sigma_grid)));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn uses_per_rep_instance(&self) -> bool {
        self.per_rep_instance
            .unwrap_or(matches!(self.family, Family::CryoEm))
    }

    /// Checks everything that can be checked without running, and loads the
    /// problem rows.
    pub fn prepare(&self) -> Result<Vec<ProblemRow>> {
        if self.reps == 0 {
            return Err(Error::config("reps must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algo.kind is empty"));
        }
        let cryo = self.family == Family::CryoEm;
        for a in &self.algorithms {
            if matches!(a, AlgorithmKind::Eigs | AlgorithmKind::EigsLocal) && !cryo {
                return Err(Error::config(format!("algorithm {a} needs problem.family = cryoem")));
            }
        }
        if self.init == InitKind::Eigs && !cryo {
            return Err(Error::config("algo.init = eigs needs problem.family = cryoem"));
        }
        // Validates cycles, schedule, dt and local settings.
        self.iddm_config(2)?.validate()?;

        let sizes = |min: usize| -> Result<()> {
            if self.n.is_empty() {
                return Err(Error::config("problem.n is empty"));
            }
            match self.n.iter().find(|&&n| n < min) {
                Some(n) => Err(Error::config(format!(
                    "problem.n must be >= {min} for {}, got {n}",
                    self.family
                ))),
                None => Ok(()),
            }
        };
        let rows = match self.family {
            Family::Hp1 => {
                sizes(2)?;
                self.n
                    .iter()
                    .map(|&n| ProblemRow::new(n, String::new(), RowSource::Hp1))
                    .collect()
            }
            Family::Biquad => {
                sizes(2)?;
                if let BiquadCase::Sparse { eta } = self.biquad_case {
                    if !(eta > 0.0 && eta < 1.0) {
                        return Err(Error::config(format!("problem.eta must be in (0,1), got {eta}")));
                    }
                }
                let param = match self.biquad_case {
                    BiquadCase::Alternating => "case=i".to_string(),
                    BiquadCase::Sparse { eta } => format!("case=ii;eta={eta:?}"),
                };
                self.n
                    .iter()
                    .map(|&n| ProblemRow::new(n, param.clone(), RowSource::Biquad))
                    .collect()
            }
            Family::Stability => self
                .graphs
                .iter()
                .map(|spec| {
                    let g = spec.build()?;
                    if g.num_vertices() == 0 {
                        return Err(Error::config(format!("graph {spec} has no vertices")));
                    }
                    Ok(ProblemRow::new(
                        g.num_vertices(),
                        spec.to_string(),
                        RowSource::Graph(g),
                    ))
                })
                .collect::<Result<_>>()?,
            Family::CryoEm => {
                if let Some(path) = &self.instance_file {
                    let text = std::fs::read_to_string(path).map_err(|e| {
                        Error::config(format!("cannot read instance file {}: {e}", path.display()))
                    })?;
                    let inst = CryoEmInstance::from_text(&text)?;
                    vec![ProblemRow::new(
                        inst.num_images(),
                        format!("p={:?}", inst.corruption_p),
                        RowSource::CryoFile(Box::new(inst)),
                    )]
                } else {
                    sizes(2)?;
                    if let Some(p) = self.corruption.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                        return Err(Error::config(format!(
                            "problem.corruption must be in [0,1], got {p}"
                        )));
                    }
                    let mut rows = Vec::new();
                    for &n in &self.n {
                        for &p in &self.corruption {
                            rows.push(ProblemRow::new(n, format!("p={p:?}"), RowSource::CryoGen(p)));
                        }
                    }
                    rows
                }
            }
        };
        Ok(rows)
    }

    /// The diffusion schedule for a problem whose largest block has
    /// `n_eff` rows.
    pub fn schedule_for(&self, n_eff: usize) -> DiffusionSchedule {
        match self.schedule {
            ScheduleKind::PowerLaw => DiffusionSchedule::PowerLaw {
                alpha: self.alpha.unwrap_or(1.0 / n_eff as f64),
                dt: self.dt,
                n_eff,
            },
            ScheduleKind::Constant => DiffusionSchedule::Constant { sigma: self.sigma },
            ScheduleKind::Cdd => DiffusionSchedule::Cdd {
                c: self.cdd_c,
                dt: self.dt,
            },
        }
    }

    pub fn iddm_config(&self, n_eff: usize) -> Result<IddmConfig> {
        let sde = SdeConfig::new(self.dt, self.steps, self.schedule_for(n_eff));
        let mut cfg = IddmConfig::new(self.cycles, sde, self.local.clone());
        cfg.keep_incumbent_start = self.keep_incumbent_start;
        cfg.initial_local_solve = self.initial_local_solve;
        cfg.no_improvement_stop = self.no_improvement_stop;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How a row's problem instances are obtained.
#[derive(Debug, Clone)]
pub enum RowSource {
    Hp1,
    Biquad,
    Graph(Graph),
    CryoGen(f64),
    CryoFile(Box<CryoEmInstance>),
}

/// One problem setting of an experiment (one line of the results table).
#[derive(Debug, Clone)]
pub struct ProblemRow {
    pub n: usize,
    /// Family-specific parameters, e.g. the graph or the corruption level.
    pub param: String,
    pub source: RowSource,
}

impl ProblemRow {
    fn new(n: usize, param: String, source: RowSource) -> Self {
        ProblemRow { n, param, source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply("problem.family = biquad").unwrap();
        cfg.apply("problem.n = 6:10:2").unwrap();
        cfg.apply("problem.case=ii").unwrap();
        cfg.apply("algo.kind = iddm,local").unwrap();
        cfg.apply("sde.alpha = 0.003").unwrap();
        cfg.apply("iddm.no_improvement_stop = 3").unwrap();
        assert_eq!(cfg.n, vec![6, 8, 10]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_and_family_are_config_errors() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.apply("problem.colour = red"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply("problem.family = tsp"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply("reps"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::parse("# c\n\nseed = x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn prepare_rejects_bad_parameters() {
        let bad = [
            "reps = 0",
            "problem.n = 1",
            "sde.dt = 0",
            "algo.cycles = 0",
            "algo.kind = eigs",
        ];
        for b in bad {
            let mut cfg = ExperimentConfig::default();
            cfg.apply(b).unwrap();
            assert!(matches!(cfg.prepare(), Err(Error::Config(_))), "{b}");
        }
        let mut cfg = ExperimentConfig::default();
        cfg.apply("problem.family = stability").unwrap();
        cfg.apply("problem.graph = file:/nonexistent/g.dimacs").unwrap();
        assert!(matches!(cfg.prepare(), Err(Error::Config(_))));
    }

    #[test]
    fn graph_specs_roundtrip() {
        for s in ["cycle:5", "complete:4", "empty:3", "petersen", "hamming:6:4", "file:a/b.col"] {
            assert_eq!(s.parse::<GraphSpec>().unwrap().to_string(), s);
        }
        assert!("hamming:6".parse::<GraphSpec>().is_err());
        assert!("cycle:x".parse::<GraphSpec>().is_err());
    }

    #[test]
    fn auto_alpha_is_reciprocal_dimension() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            cfg.schedule_for(40),
            DiffusionSchedule::PowerLaw {
                alpha: 1.0 / 40.0,
                dt: 0.1,
                n_eff: 40
            }
        );
    }
}
