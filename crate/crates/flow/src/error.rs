use thiserror::Error;

/// Errors produced by the optical flow pipeline.
#[derive(Debug, Error)]
pub enum FlowError {
    /// A parameter value is outside its documented range.
    #[error("{op}: {msg}")]
    Config { op: &'static str, msg: String },

    /// Inputs that can never be valid together, such as mismatched frame sizes.
    #[error("{0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but its bytes do not parse as the expected format.
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl FlowError {
    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        FlowError::Config { op, msg: msg.into() }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        FlowError::Usage(msg.into())
    }

    pub(crate) fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        FlowError::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, FlowError>;
