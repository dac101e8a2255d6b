use std::path::PathBuf;

use sao_adapter::{HarnessError, ServiceError};
use sao_core::{DdmError, FrameworkError};
use sao_platoon::ScenarioError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration file not found: {}", .0.display())]
    ConfigNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Ddm { path: PathBuf, source: DdmError },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error("seed {seed}: simulation diverged at t = {time} s")]
    SimulationDiverged { seed: u64, time: f64 },
    #[error("seed {seed}: {source}")]
    Harness { seed: u64, source: HarnessError },
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {reason}", path.display())]
    BadRun { path: PathBuf, reason: String },
    #[error("plot: {0}")]
    Plot(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }

    pub fn harness(seed: u64, source: HarnessError) -> CliError {
        match source {
            HarnessError::Diverged(time) => CliError::SimulationDiverged { seed, time },
            source => CliError::Harness { seed, source },
        }
    }
}
