//! Experiment harness for the `dccpd` library: configuration, benchmark
//! runners, the DOA demo and CSV/JSON reporting.

pub mod cli;
pub mod config;
pub mod doa;
pub mod error;
pub mod experiments;
pub mod report;

pub use cli::{execute, run, Args};
pub use config::{ArrayKind, DoaConfig, Experiment, ExperimentConfig, SolverKind};
pub use error::{CliError, CliResult};
