use thiserror::Error;

/// Errors raised by the kinematics, constraint and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    #[error("invalid limits: {0}")]
    InvalidLimits(String),

    #[error("control point index {index} out of range (model has {count})")]
    InvalidControlPoint { index: usize, count: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("task is not redundant: task dimension {m} must be smaller than joint count {n}")]
    NotRedundant { m: usize, n: usize },

    #[error("solver exceeded {limit} outer iterations")]
    IterationLimit { limit: usize },

    #[error("problem has {rows} constrained rows, oracle enumeration is capped at {cap}")]
    SizeCap { rows: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
