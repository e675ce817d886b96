use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("action {action:?} lies outside the action box")]
    ActionOutOfBounds { action: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no sampled actions")]
    NoSampledActions,

    #[error("kernel matrix not positive definite")]
    NotPositiveDefinite,

    #[error("aggregation with {strategy} failed: {source}")]
    Aggregation {
        strategy: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
