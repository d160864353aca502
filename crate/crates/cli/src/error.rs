use thiserror::Error;

use wer_lab_core::evolution::EvolutionError;
use wer_lab_core::nh::NhError;
use wer_lab_core::optics::OpticsError;
use wer_lab_core::tomography::FitError;
use wer_lab_core::topology::TopologyError;

/// Every failure the driver reports. Each class has its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unit error at `{path}`: {message}")]
    Unit { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] NhError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{failed} of {total} artifacts failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.into(), message: message.into() }
    }

    pub fn unit(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Unit { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code. 2 is left to argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 3,
            CliError::Unit { .. } => 4,
            CliError::Io { .. } => 5,
            CliError::Model(_) => 6,
            CliError::Evolution(_) => 7,
            CliError::Optics(_) => 8,
            CliError::Fit(_) => 9,
            CliError::Topology(_) => 10,
            CliError::Partial { .. } => 11,
        }
    }
}
