//! Command failures carry the process exit code: 1 for validation problems
//! (bad flags, bad config values, malformed file content), 2 for I/O
//! failures (missing or unreadable files).

use mmkit_autodiff::AutodiffError;
use mmkit_data::DataError;
use mmkit_flow::FlowError;
use mmkit_model::ModelError;
use mmkit_pipeline::PipelineError;
use mmkit_track::TrackError;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: EXIT_VALIDATION }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: EXIT_IO }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn code_autodiff(e: &AutodiffError) -> i32 {
    if matches!(e, AutodiffError::Io(_)) {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

fn code_data(e: &DataError) -> i32 {
    if matches!(e, DataError::Io(_)) {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

fn code_model(e: &ModelError) -> i32 {
    match e {
        ModelError::Io(_) => EXIT_IO,
        ModelError::Data(inner) => code_data(inner),
        ModelError::Autodiff(inner) => code_autodiff(inner),
        _ => EXIT_VALIDATION,
    }
}

fn code_pipeline(e: &PipelineError) -> i32 {
    match e {
        PipelineError::Io(_) => EXIT_IO,
        PipelineError::Data(inner) => code_data(inner),
        PipelineError::Model(inner) => code_model(inner),
        PipelineError::Autodiff(inner) => code_autodiff(inner),
        _ => EXIT_VALIDATION,
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        let code = if matches!(e, TrackError::Io(_)) { EXIT_IO } else { EXIT_VALIDATION };
        CliError { message: e.to_string(), code }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        let code = if matches!(e, FlowError::Io(_)) { EXIT_IO } else { EXIT_VALIDATION };
        CliError { message: e.to_string(), code }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError { message: e.to_string(), code: code_data(&e) }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError { message: e.to_string(), code: code_model(&e) }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError { message: e.to_string(), code: code_pipeline(&e) }
    }
}

impl From<AutodiffError> for CliError {
    fn from(e: AutodiffError) -> Self {
        CliError { message: e.to_string(), code: code_autodiff(&e) }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { message: e.to_string(), code: EXIT_IO }
    }
}
