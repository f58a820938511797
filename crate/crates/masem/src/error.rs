use thiserror::Error;

/// Errors produced by the sampling library.
#[derive(Error, Debug)]
pub enum MasemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A constraint function returned NaN or infinity. Carries the row index
    /// of the offending output so benchmark bugs surface immediately.
    #[error("non-finite {what} output at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate resampling weights (all zero) at stage {stage}")]
    DegenerateWeights { stage: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MasemError>;
