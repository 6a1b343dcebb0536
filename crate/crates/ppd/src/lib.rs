//! Command-line front end, file formats and self-checks for the power packet
//! dispatching simulator.

pub mod commands;
pub mod format;
pub mod io;
pub mod validate;

use ppd_core::SimError;
use thiserror::Error;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(io::IoError),
    #[error("{0}")]
    OracleMismatch(String),
    #[error(transparent)]
    Run(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Scenario(_) => 3,
            CliError::OracleMismatch(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnpairedSlot(_) | SimError::EmptyRun | SimError::InvalidScenario(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Run(other.into()),
        }
    }
}

impl From<io::IoError> for CliError {
    fn from(e: io::IoError) -> Self {
        match e {
            io::IoError::Read { .. } | io::IoError::Parse { .. } | io::IoError::Invalid { .. } => CliError::Scenario(e),
            other => CliError::Run(other.into()),
        }
    }
}
