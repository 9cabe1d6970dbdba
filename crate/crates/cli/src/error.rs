use thiserror::Error;

use qgids_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::FactorizationBreakdown(_) | CoreError::SolverFailure(_) => CliError::Solver(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}
