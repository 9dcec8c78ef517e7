use thiserror::Error;

/// Error type shared by dataset assembly, training, and evaluation.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// A configuration value is invalid on its own or in combination.
    #[error("config error in {op}: {msg}")]
    Config { op: String, msg: String },

    /// An input does not satisfy an operation's preconditions.
    #[error("input error in {op}: {msg}")]
    Input { op: String, msg: String },

    /// The training loss left the finite range; names where it happened so
    /// the run can be reproduced up to the failing step.
    #[error("training diverged: loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error(transparent)]
    Data(#[from] mmkit_data::DataError),

    #[error(transparent)]
    Model(#[from] mmkit_model::ModelError),

    #[error(transparent)]
    Autodiff(#[from] mmkit_autodiff::AutodiffError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but its contents cannot be used.
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },
}

impl PipelineError {
    pub fn config(op: impl Into<String>, msg: impl Into<String>) -> Self {
        PipelineError::Config { op: op.into(), msg: msg.into() }
    }

    pub fn input(op: impl Into<String>, msg: impl Into<String>) -> Self {
        PipelineError::Input { op: op.into(), msg: msg.into() }
    }

    pub fn format(path: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        PipelineError::Format { path: path.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
