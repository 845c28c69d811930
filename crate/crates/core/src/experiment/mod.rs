//! Experiment configuration, repetition sweeps and CSV/JSON output.

mod config;
mod run;
mod sweep;

pub use config::{
    AlgorithmKind, ExperimentConfig, Family, GraphSpec, InitKind, ProblemRow, RowSource,
    ScheduleKind,
};
pub use run::{
    build_instance, rep_seed, reported_value, run_algorithm, run_experiment, AlgorithmOutcome,
    Instance, RepRecord, ResultsTable, SummaryRow,
};
pub use sweep::{sweep_sigma, SigmaSweep};
