//! Command implementations behind the `continuized` binary. The binary is a
//! thin argument-parsing shell; everything testable lives here.

pub mod commands;
pub mod config;
pub mod output;
pub mod probes;

use continuized::baselines::BaselineError;
use continuized::process::ProcessError;
use thiserror::Error;

/// Failures that terminate a command, tagged with the exit code they map to:
/// 2 for usage and configuration problems, 3 for numerical divergence.
/// Probe failures are not errors; `check` reports them through exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl From<ProcessError> for CliError {
    fn from(e: ProcessError) -> Self {
        match e {
            ProcessError::Diverged { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Diverged { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<continuized::objectives::ObjectiveError> for CliError {
    fn from(e: continuized::objectives::ObjectiveError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<continuized::presets::PresetError> for CliError {
    fn from(e: continuized::presets::PresetError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<continuized::geometry::GeometryError> for CliError {
    fn from(e: continuized::geometry::GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<continuized::model::ModelError> for CliError {
    fn from(e: continuized::model::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<continuized::analysis::AnalysisError> for CliError {
    fn from(e: continuized::analysis::AnalysisError) -> Self {
        CliError::Config(e.to_string())
    }
}
