//! Experiment harness for the SQE simulator: configuration layering,
//! experiment runners and run summaries.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ConfigError, Experiment, ExperimentConfig, Overrides};
pub use experiments::{run, RunError};
pub use output::{Check, RunOutput, RunSummary, Table};
