use thiserror::Error;

/// Errors raised by models, kernels, table construction and table I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration lies outside the admissible domain of a model.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An internal invariant of a chain was violated, e.g. a zero target
    /// density at the current sample.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// The requested operation is not supported by the chosen model.
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("table build failed at node {node}: {reason}")]
    Build { node: usize, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
