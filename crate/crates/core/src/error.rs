use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    OutOfRange { index: usize, dim: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("degenerate state: norm {norm:e} is too small to normalize")]
    DegenerateState { norm: f64 },

    #[error(
        "truncation too small: tail mass {tail:e} exceeds budget {budget:e} at dim {dim}; \
         use dim >= {min_dim}"
    )]
    TruncationTooSmall {
        dim: usize,
        tail: f64,
        budget: f64,
        min_dim: usize,
    },

    #[error("invalid search configuration: {0}")]
    Config(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
