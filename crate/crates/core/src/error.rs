use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgfsError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("invalid sparsity budget: {0}")]
    InvalidBudget(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("problem too large for exhaustive enumeration: p = {p} exceeds limit {limit}")]
    SizeLimitExceeded { p: usize, limit: usize },

    #[error("{method} did not converge within {iterations} iterations")]
    NotConverged { method: &'static str, iterations: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("non-contiguous group ids: {0}")]
    NonContiguousGroups(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SgfsError>;

pub(crate) fn check_len(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SgfsError::DimensionMismatch {
            expected,
            got,
            context,
        })
    }
}
