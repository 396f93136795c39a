//! Command implementations behind the `fpeval` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{cmd_compare_modes, cmd_dedup, cmd_eval, cmd_scan, cmd_synth, ModeComparison, SharedFingers};
pub use config::RunConfig;
pub use error::{exit, CliError, CliResult};
pub use report::EvaluationReport;
