use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("stage {stage} out of range (horizon {horizon})")]
    StageOutOfRange { stage: usize, horizon: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("no closed form: {0}")]
    NoClosedForm(String),
    #[error("not prox-friendly: {0}")]
    NotProxFriendly(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("stopping time is not adapted: {0}")]
    NonAdapted(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    MaxIter,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
