use thiserror::Error;

/// Failures of the command-line driver, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<qbm_core::Error> for CliError {
    fn from(e: qbm_core::Error) -> Self {
        match e {
            qbm_core::Error::Unsupported(_) | qbm_core::Error::Horizon { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Short per-row failure code written into sweep outputs.
pub fn row_code(e: &qbm_core::Error) -> i32 {
    CliError::from(e.clone()).exit_code()
}
