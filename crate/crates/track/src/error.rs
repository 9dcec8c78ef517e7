use thiserror::Error;

/// Errors produced by the tracking pipeline.
#[derive(Debug, Error)]
pub enum TrackError {
    /// A parameter value is outside its documented range.
    #[error("{op}: {msg}")]
    Config { op: &'static str, msg: String },

    /// Inputs that can never be valid together, such as out-of-order frames.
    #[error("{0}")]
    Usage(String),

    /// A filter state that violates its own invariants, such as a covariance
    /// that is no longer positive-definite.
    #[error("{0}")]
    State(String),

    /// A linear-algebra failure that valid inputs should never produce.
    #[error("{0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but its content does not parse as the expected format.
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl TrackError {
    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        TrackError::Config { op, msg: msg.into() }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        TrackError::Usage(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        TrackError::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, TrackError>;
