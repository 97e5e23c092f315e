use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("input of length {got} does not match 2^{depth} + 1 = {expected}")]
    WrongLength {
        depth: usize,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("time {value} outside [0, 1]")]
    TimeOutOfRange { value: f64 },

    #[error("quadrature failed in {context}: {reason}")]
    Quadrature {
        context: &'static str,
        reason: String,
    },

    #[error("root finding did not converge in {context}")]
    RootFinding { context: &'static str },

    #[error("dyadic index out of range: level {level}, index {index}")]
    IndexOutOfRange { level: usize, index: usize },

    #[error("incompatible depths: {reason}")]
    IncompatibleDepths { reason: String },

    #[error("depth {depth} exceeds backend limit {limit}")]
    DepthTooLarge { depth: usize, limit: usize },

    #[error("covariance matrix is not positive definite (pivot {pivot} at index {index})")]
    CholeskyFailure { pivot: f64, index: usize },

    #[error("algebraic identity check failed in {context}: relative error {rel_err:.3e} exceeds {tol:.3e}")]
    IdentityMismatch {
        context: &'static str,
        rel_err: f64,
        tol: f64,
    },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("singular integrand outside the integrable regime: {reason}")]
    DivergentSingularity { reason: String },

    #[error("insufficient samples for {context}: {got} hits, need at least {need}")]
    InsufficientSamples {
        context: &'static str,
        got: usize,
        need: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
