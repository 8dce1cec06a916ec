use edo_clothsim::SimError;
use edo_diffnum::DiffError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("incompatible inputs: {0}")]
    Compat(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Argument(_) => 2,
            CoreError::Data(_) | CoreError::Compat(_) | CoreError::Io(_) | CoreError::Json(_) => 3,
            CoreError::Numerical(_) => 4,
            CoreError::Sim(SimError::Argument(_)) => 2,
            CoreError::Sim(_) => 4,
            CoreError::Diff(DiffError::NonFinite { .. } | DiffError::NonFiniteGradient(_)) => 4,
            CoreError::Diff(DiffError::Checkpoint(_) | DiffError::Io(_)) => 3,
            CoreError::Diff(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
