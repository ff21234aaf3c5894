use thiserror::Error;

/// Errors raised by the model, sampling and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WrmError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("{what} size {size} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("rule mismatch: {0}")]
    RuleMismatch(String),

    #[error("infinite or truncated cluster: {0}")]
    InfiniteCluster(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl WrmError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        WrmError::Parameter(msg.into())
    }
}

pub type Result<T, E = WrmError> = std::result::Result<T, E>;
