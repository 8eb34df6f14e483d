use std::process::ExitCode;

use photonic_coherence::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    /// 3 when a numerical contract broke, 2 for anything wrong with the inputs.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(
                CoreError::ContractViolation(_) | CoreError::NotUnitary { .. } | CoreError::NotNormalized { .. },
            ) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}
