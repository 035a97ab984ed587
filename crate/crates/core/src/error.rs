use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity {arity} out of range (supported {min}..={max})")]
    ArityOutOfRange { arity: usize, min: usize, max: usize },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("overlap {0} outside [-1, 1]")]
    OverlapOutOfDomain(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("work estimate {needed:e} exceeds budget {budget:e}")]
    BudgetExceeded { needed: f64, budget: f64 },
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
