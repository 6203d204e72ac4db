use thiserror::Error;

/// Errors produced by the geometry engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unbound variable x{}", .index + 1)]
    UnboundVariable { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("zero vector: the operation is undefined at the origin of the fiber")]
    ZeroVector,

    #[error("Legendre inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },

    #[error("covector outside the domain of the exponential map (extremal stopped at t = {t})")]
    OutsideDomainOfExp { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
