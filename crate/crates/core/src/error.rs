use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The subproblem solver returned a step without model decrease.
    #[error("predicted reduction {0:e} is not positive")]
    NonPositivePrediction(f64),

    #[error("model gradient is zero")]
    ZeroGradient,

    #[error("trust-region radius must be positive, got {0:e}")]
    NonPositiveRadius(f64),

    #[error("batch of {batch} samples requested from a population of {population}")]
    BatchTooLarge { batch: u64, population: u64 },

    #[error("component index {index} out of range for {count} components")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("objective produced a non-finite {0}")]
    NonFinite(&'static str),

    #[error("{0} is not supported by this problem")]
    Unsupported(&'static str),

    #[error("L-SR1 core matrix is singular")]
    SingularCore,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed IDX data: {0}")]
    Idx(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
