use thiserror::Error;

/// Errors raised while building or manipulating problem data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Failures of the dense kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// 1-based index of the first pivot that fell below the tolerance.
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    /// 1-based index of the singular pivot.
    #[error("matrix is singular (pivot {0})")]
    Singular(usize),
    #[error("conjugate gradient breakdown after {0} iterations")]
    Breakdown(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// SDPA reader failure with the 1-based line it occurred on.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, reason: impl Into<String>) -> Self {
        Self {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("step length {0:e} below the stall threshold")]
    StepTooSmall(f64),
    #[error("primal candidate is not certified positive semidefinite")]
    NotCertified,
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("unknown family '{0}' (expected maxcut, gpp or diagprecond)")]
    UnknownFamily(String),
}
