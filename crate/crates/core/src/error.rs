use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameter combination.
    #[error("configuration error: {0}")]
    Config(String),
    /// Operation called on an object in the wrong state (e.g. an empty calibration set).
    #[error("state error: {0}")]
    State(String),
    /// Caller supplied unusable input.
    #[error("usage error: {0}")]
    Usage(String),
    /// Training data cannot support the requested fit.
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    /// Argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed input line.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Usage(format!("i/o: {e}"))
    }
}
