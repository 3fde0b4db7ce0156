use thiserror::Error;

/// Errors produced by the core algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or parameter combination is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Input data does not satisfy the operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),
    /// A measurement could not be computed from the given data.
    #[error("measurement failed: {0}")]
    Measurement(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
