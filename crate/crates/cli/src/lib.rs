//! Experiment runner for the phlab queueing laboratory.
//!
//! A run takes an [`ExperimentConfig`] (JSON), validates it against the
//! experiment's schema, executes the experiment under a single master seed
//! and produces a [`RunArtifact`]: data files, a manifest sufficient to
//! reproduce them, and the outcome of every assertion. [`emit_report`]
//! combines artifacts into one table, and [`accept`] runs the complete
//! acceptance suite against independent oracles.

pub mod accept;
pub mod artifact;
pub mod config;
pub mod error;
pub mod experiments;
pub mod oracles;
pub mod registry;
pub mod report;

pub use artifact::{Assertion, DataFile, Manifest, RunArtifact};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::{emit_report, Report};

use std::time::Instant;

/// Validates and executes `cfg` without writing anything.
///
/// Errors with [`CliError::UnknownExperiment`] for unregistered names and
/// with [`CliError::Config`] (carrying the field path) for schema
/// violations; laboratory errors are propagated with context.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    let info = registry::lookup(&cfg.experiment)
        .ok_or_else(|| CliError::UnknownExperiment { name: cfg.experiment.clone(), available: registry::names() })?;
    let start = Instant::now();
    let outcome = (info.run)(cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let mut echo = cfg.clone();
    echo.seed = Some(cfg.seed());
    let config = serde_json::to_value(&echo)?;
    Ok(RunArtifact::new(info.name, config, cfg.seed(), wall, outcome.files, outcome.assertions))
}

/// Executes `cfg` and writes the artifact atomically into its output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifact> {
    let artifact = execute(cfg)?;
    artifact.write(&cfg.out_dir())?;
    Ok(artifact)
}
