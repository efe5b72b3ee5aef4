use thiserror::Error;

/// Errors raised by the optimization kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (smallest eigenvalue {min:e}, largest {max:e})")]
    NotPositiveDefinite { min: f64, max: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("point lies outside the domain of {0}")]
    Domain(&'static str),

    #[error("conjugate map overflow: max coordinate {0} exceeds the exponential guard")]
    Overflow(f64),

    #[error("unsupported geometry/regularizer pair: {geometry} x {regularizer}")]
    UnsupportedPair {
        geometry: &'static str,
        regularizer: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset exhausted after {0} samples")]
    Exhausted(usize),

    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: u64, residual: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
