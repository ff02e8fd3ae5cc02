use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A Schur complement collapsed while extending a Gram inverse, which in
    /// practice means a duplicated context with a vanishing regularizer.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("environment exhausted after {0} steps")]
    EndOfData(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
