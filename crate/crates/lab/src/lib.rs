//! Reproducible experiments on top of `transport-core`: configuration,
//! scenario runners, reports and the `transport-lab` CLI.

pub mod config;
pub mod experiments;
pub mod report;

use std::time::Instant;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use report::{ExperimentReport, Series, Verdict};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] transport_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// 2 for configuration and usage problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(transport_core::Error::Numerics { .. }) => 1,
            _ => 2,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;

/// Runs the named experiment on the current rayon pool.
pub fn run_experiment(name: &str, config: &ExperimentConfig) -> LabResult<ExperimentReport> {
    let mut cfg = config.clone();
    if cfg.experiment.is_empty() {
        cfg.experiment = name.to_string();
    } else if cfg.experiment != name {
        return Err(LabError::Config(format!("config names experiment `{}` but `{name}` was requested", cfg.experiment)));
    }
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match name {
        "persistence" => experiments::run_persistence(&cfg),
        "noise-demo" => experiments::run_noise_regularization_demo(&cfg),
        "uniqueness" => experiments::run_uniqueness_agreement(&cfg),
        "ic-stability" => experiments::run_ic_stability(&cfg),
        "drift-stability" => experiments::run_drift_stability(&cfg),
        "weak-residual" => experiments::run_weak_residual(&cfg),
        "flow-stats" => experiments::run_flow_stats(&cfg),
        other => Err(LabError::Config(format!("unknown experiment `{other}`"))),
    }?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the named experiment on a dedicated pool of `workers` threads.
pub fn run_with_workers(name: &str, config: &ExperimentConfig, workers: usize) -> LabResult<ExperimentReport> {
    if workers == 0 {
        return Err(LabError::Config("workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(name, config))
}
