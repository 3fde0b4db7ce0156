//! CLI error type and its mapping to process exit codes.

use std::path::Path;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT_FORMAT: u8 = 3;
pub const EXIT_SCHEMA: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or flag combinations.
    #[error("usage error: {0}")]
    Usage(String),
    /// An input file has the wrong format, layout or content.
    #[error("input format error: {0}")]
    InputFormat(String),
    /// A scenario or sidecar document violates its schema.
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cdr_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::InputFormat(_) => EXIT_INPUT_FORMAT,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Io { .. } => EXIT_FAILURE,
            CliError::Core(cdr_core::Error::Config(_)) => EXIT_USAGE,
            CliError::Core(cdr_core::Error::Input(_)) => EXIT_INPUT_FORMAT,
            CliError::Core(cdr_core::Error::Measurement(_)) => EXIT_FAILURE,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn writing(path: &Path, source: std::io::Error) -> Self {
        Self::io(format!("cannot write {}", path.display()), source)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn input_format<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::InputFormat(msg.into()))
}

pub fn schema<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Schema(msg.into()))
}
