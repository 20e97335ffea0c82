//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor, hypergraph and pipeline operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or layout disagreement between operands.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A parameter violates its documented constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Input carries NaN or infinite values where finite values are required.
    #[error("non-finite input: {0}")]
    NonFinite(String),
    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
