use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unknown {kind} `{value}`")]
    Lookup { kind: &'static str, value: String },

    #[error("cannot build hierarchy: {0}")]
    Build(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn lookup(kind: &'static str, value: impl Into<String>) -> Self {
        Error::Lookup {
            kind,
            value: value.into(),
        }
    }
}
