use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use thiserror::Error;

/// Failure classes of the `dspp` binary, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("transform is not a valid LST: {0}")]
    Violations(String),

    #[error("verification failed: {0}")]
    VerifyFailed(String),

    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Violations(_) => 4,
            CliError::VerifyFailed(_) => 5,
            CliError::Convergence(_) => 6,
        })
    }
}

impl From<dspp_core::Error> for CliError {
    fn from(e: dspp_core::Error) -> Self {
        match e {
            dspp_core::Error::ConvergenceFailure { .. } => CliError::Convergence(e.to_string()),
            dspp_core::Error::Check { ref source, .. }
                if matches!(**source, dspp_core::Error::ConvergenceFailure { .. }) =>
            {
                CliError::Convergence(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
