use thiserror::Error;

/// CLI failure, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed files.
    #[error("{0}")]
    Usage(String),
    /// Well-formed input the library rejects.
    #[error("{0}")]
    Data(String),
    #[error("solver did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged { .. } => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<bilarx_core::Error> for CliError {
    fn from(e: bilarx_core::Error) -> Self {
        use bilarx_core::Error as E;
        match e {
            E::BudgetExceeded { .. } | E::UnknownScenario(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
