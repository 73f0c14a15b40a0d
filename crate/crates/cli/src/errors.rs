//! CLI error taxonomy mapped to process exit codes: 2 for configuration
//! problems, 3 for data and shape problems, 4 for usage, 1 for everything
//! else.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Usage(_) => 4,
            CliError::Internal(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
