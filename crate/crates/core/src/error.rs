use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the homogenization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular tensor (det = {det:e})")]
    SingularTensor { det: f64 },

    #[error("non-positive Jacobian det(F) = {det:e} at {location}")]
    NonPositiveJacobian { det: f64, location: String },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e}){context}")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        context: String,
    },

    #[error(
        "conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})"
    )]
    CgStalled { iterations: usize, residual: f64 },

    #[error("root finding failed: {0}")]
    RootFindFailed(String),

    #[error("sampling box rejected {rejected} of {drawn} draws")]
    RejectionOverflow { rejected: usize, drawn: usize },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("insufficient data: {records} records for {weights} weights")]
    InsufficientData { records: usize, weights: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in reject logs.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::SingularTensor { .. } => "SingularTensor",
            Error::NonPositiveJacobian { .. } => "NonPositiveJacobian",
            Error::NewtonDiverged { .. } => "NewtonDiverged",
            Error::CgStalled { .. } => "CgStalled",
            Error::RootFindFailed(_) => "RootFindFailed",
            Error::RejectionOverflow { .. } => "RejectionOverflow",
            Error::TrainingDiverged(_) => "TrainingDiverged",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "Parse",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
