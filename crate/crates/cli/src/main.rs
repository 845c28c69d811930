//! `iddm`: experiment runner, verification suite and instance generators.
//!
//! Exit codes: 0 success, 1 run failure, 2 configuration error,
//! 3 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iddm::experiment::{run_experiment, sweep_sigma, ExperimentConfig, GraphSpec};
use iddm::problems::{cryoem_generate, write_dimacs};
use iddm::verify::{verify_all, Budget, DriftMutation};
use iddm::{Error, RngStream};

#[derive(Parser)]
#[command(name = "iddm", version, about = "Global optimization on Stiefel manifolds by intermittent diminishing diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write runs.csv, summary.csv and report.json.
    Run(ExperimentArgs),
    /// Sweep the initial diffusion strength and write the log-ratio matrix.
    SweepSigma {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated strengths; defaults to `sweep.sigma`.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
    },
    /// Run the verification suite and emit a JSON report.
    Verify {
        #[arg(long, value_enum, default_value_t = BudgetArg::Quick)]
        budget: BudgetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: flip the sign of the Ito drift in the drift check.
        #[arg(long, hide = true)]
        mutate_drift: bool,
    },
    /// Write a graph in DIMACS format.
    GraphGen {
        /// cycle:M, complete:M, empty:M, petersen or hamming:D:T.
        graph: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic cryo-EM common-lines instance.
    CryoemGen {
        #[arg(long)]
        images: usize,
        #[arg(long, default_value_t = 0.0)]
        corruption: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file of `key = value` lines.
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set problem.n=20,40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    Quick,
    Full,
}

enum Failure {
    Run(String),
    Config(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Config(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Failure::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            cfg.apply(kv)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Run(e.to_string()))?;
            }
            std::fs::write(p, text)
                .map_err(|e| Failure::Run(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let table = run_experiment(&cfg)?;
            print!("{}", table.render());
            if let Some(dir) = &cfg.out_dir {
                table.write(dir)?;
                eprintln!("wrote {}", dir.display());
            }
        }
        Command::SweepSigma { exp, sigma } => {
            let cfg = exp.load()?;
            let grid = sigma.unwrap_or_else(|| cfg.sigma_grid.clone());
            let sweep = sweep_sigma(&cfg, &grid)?;
            let csv = sweep.to_csv()?;
            match &cfg.out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Failure::Run(e.to_string()))?;
                    write_or_print(Some(&dir.join("sweep_sigma.csv")), &csv)?;
                    eprintln!("wrote {}", dir.join("sweep_sigma.csv").display());
                }
                None => print!("{csv}"),
            }
        }
        Command::Verify {
            budget,
            seed,
            out,
            mutate_drift,
        } => {
            let budget = match budget {
                BudgetArg::Quick => Budget::Quick,
                BudgetArg::Full => Budget::Full,
            };
            let mutation = if mutate_drift {
                DriftMutation::FlipItoDrift
            } else {
                DriftMutation::None
            };
            let report = verify_all(budget, seed, mutation)?;
            for c in &report.checks {
                eprintln!(
                    "{} {:<28} estimate {:.4e} target {:.4e} tol {:.2e} ({:.1}s)",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.estimate,
                    c.target,
                    c.tolerance,
                    c.seconds
                );
            }
            write_or_print(out.as_deref(), &(report.to_json()? + "\n"))?;
            if !report.passed {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                return Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))));
            }
        }
        Command::GraphGen { graph, out } => {
            let spec: GraphSpec = graph.parse()?;
            if matches!(spec, GraphSpec::File(_)) {
                return Err(Failure::Config("graph-gen needs a generated graph, not a file".into()));
            }
            let g = spec.build()?;
            write_or_print(out.as_deref(), &write_dimacs(&g, Some(&spec.to_string())))?;
        }
        Command::CryoemGen {
            images,
            corruption,
            seed,
            out,
        } => {
            let inst = cryoem_generate(images, corruption, &RngStream::new(seed))?;
            write_or_print(out.as_deref(), &inst.to_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}
