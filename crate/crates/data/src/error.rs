use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Input(String),
    #[error("{field}: {msg}")]
    Validation { field: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

impl DataError {
    pub fn validation(field: impl Into<String>, msg: impl Into<String>) -> Self {
        DataError::Validation { field: field.into(), msg: msg.into() }
    }

    pub fn format(path: impl std::fmt::Display, msg: impl Into<String>) -> Self {
        DataError::Format { path: path.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
