use thiserror::Error;

/// Errors raised anywhere in the surrogate-construction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("basis of {requested} terms exceeds the capacity limit of {cap}")]
    Capacity { requested: u128, cap: usize },

    #[error("residual target {epsilon:e} is below the least-squares minimum {min_residual:e}")]
    Infeasible { epsilon: f64, min_residual: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cross-validation failed: every candidate was infeasible")]
    Selection,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}
