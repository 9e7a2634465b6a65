//! Experiment registry. Each runner computes its tables, metrics and checks
//! in memory; nothing is written until the whole run has succeeded.

use std::time::Instant;

use serde_json::Value;
use sqe_core::{SeedPath, SqeError};

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::output::{Check, GeneratorInfo, RunOutput, RunSummary, Table, SUMMARY_SCHEMA_VERSION};

mod born;
mod evolve;
mod model_a;
mod relax_time;
mod singlet;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation error: {0}")]
    Sim(#[from] SqeError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// What a runner hands back.
pub(crate) struct Results {
    pub tables: Vec<Table>,
    pub metrics: Value,
    pub checks: Vec<Check>,
}

/// Root of every seed path in a run.
pub(crate) fn run_root(config: &ExperimentConfig) -> SeedPath {
    SeedPath::root(config.master_seed).child(config.experiment.name())
}

/// Runs the configured experiment on a pool of `config.workers` threads.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build()?;
    let start = Instant::now();
    let results = pool.install(|| match config.experiment {
        Experiment::ModelA => model_a::run(config),
        Experiment::Born => born::run(config),
        Experiment::RelaxTime => relax_time::run(config),
        Experiment::Evolve => evolve::run(config),
        Experiment::Corr => singlet::run_corr(config),
        Experiment::Chsh => singlet::run_chsh(config),
        Experiment::Marginals => singlet::run_marginals(config),
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = results.checks.iter().all(|c| c.pass);
    Ok(RunOutput {
        summary: RunSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            experiment: config.experiment.name().to_string(),
            generator: GeneratorInfo::default(),
            config: config.clone(),
            metrics: results.metrics,
            checks: results.checks,
            pass,
            wall_time_s: config.timing.then_some(elapsed),
        },
        tables: results.tables,
    })
}
