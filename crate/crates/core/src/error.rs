use thiserror::Error;

/// Errors raised by the beam-training library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no sample exceeds threshold {threshold}")]
    EmptySet { threshold: f64 },

    #[error("no signal detected in sweep")]
    NoSignal,

    #[error("noise region has {got} indices, need at least {need}")]
    InsufficientNoiseRegion { got: usize, need: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
