use thiserror::Error;

/// Errors raised by the library. Numerical trouble inside a search is
/// reported through result statuses instead; these are contract violations
/// and failures that leave no meaningful result.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite parameter value at index {index}")]
    NonFiniteParameter { index: usize },

    #[error("non-finite log-likelihood at finite-difference stencil point (coordinate {coordinate})")]
    Stencil { coordinate: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("log-likelihood is not finite at the starting point")]
    NonFiniteStart,

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
