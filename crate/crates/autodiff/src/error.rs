use thiserror::Error;

pub type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Debug, Error)]
pub enum AutodiffError {
    /// Incompatible operand shapes, named so the caller can see both sides.
    #[error("{op}: dimension mismatch: {lhs:?} vs {rhs:?}")]
    DimMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    Config { op: &'static str, msg: String },

    #[error("class index {index} out of range for {n_classes} classes")]
    IndexOutOfRange { index: usize, n_classes: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed tensor file {path}: {msg}")]
    Format { path: String, msg: String },
}

impl AutodiffError {
    pub fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        AutodiffError::DimMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn config(op: &'static str, msg: impl Into<String>) -> Self {
        AutodiffError::Config {
            op,
            msg: msg.into(),
        }
    }
}
