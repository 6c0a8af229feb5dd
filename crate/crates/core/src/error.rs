use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid compressor parameter: {0}")]
    InvalidCompressor(String),

    #[error("worker index {index} out of range for {workers} workers")]
    WorkerOutOfRange { index: usize, workers: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error(
        "reference solver did not converge: squared gradient norm {achieved:e} > {tolerance:e}"
    )]
    ReferenceNotConverged { achieved: f64, tolerance: f64 },

    #[error("condition number {target} is unattainable: {reason}")]
    UnattainableCondition { target: f64, reason: String },

    #[error("theorem {theorem} preconditions violated: {reason}")]
    TheoremPrecondition { theorem: u8, reason: String },

    #[error("strategy/theorem mismatch: {0}")]
    Mismatch(String),

    #[error("missing reference solution: {0}")]
    MissingReference(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
