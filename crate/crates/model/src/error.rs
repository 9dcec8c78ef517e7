use thiserror::Error;

/// Error type shared by every model component.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A configuration value is invalid on its own or in combination.
    #[error("config error in {op}: {msg}")]
    Config { op: String, msg: String },

    /// An input does not match what the configured model expects.
    #[error("input error in {op}: {msg}")]
    Input { op: String, msg: String },

    /// A component was used before it was ready (for example eval-mode
    /// batch norm before any statistics were accumulated).
    #[error("state error: {0}")]
    State(String),

    /// Failure raised by the underlying graph machinery.
    #[error(transparent)]
    Autodiff(#[from] mmkit_autodiff::AutodiffError),

    /// Failure raised while shaping media inputs.
    #[error(transparent)]
    Data(#[from] mmkit_data::DataError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A checkpoint file exists but its contents cannot be used.
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },
}

impl ModelError {
    pub fn config(op: impl Into<String>, msg: impl Into<String>) -> Self {
        ModelError::Config { op: op.into(), msg: msg.into() }
    }

    pub fn input(op: impl Into<String>, msg: impl Into<String>) -> Self {
        ModelError::Input { op: op.into(), msg: msg.into() }
    }

    pub fn format(path: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        ModelError::Format { path: path.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
