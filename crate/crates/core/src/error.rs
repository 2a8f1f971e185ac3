//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced while loading data, validating shapes, or training.
#[derive(Debug)]
pub enum Error {
    /// Underlying I/O failure.
    Io(io::Error),
    /// A data file could not be parsed; carries the file and 1-based line number.
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// Referential integrity violation (unknown item, wrong feature width, ...).
    Integrity(String),
    /// No user is present in every domain.
    EmptyOverlap,
    /// Matrix or vector dimensions do not line up.
    Shape(String),
    /// Invalid configuration value or combination.
    Config(String),
    /// The evaluation protocol cannot be satisfied (e.g. not enough items
    /// to sample the requested number of negatives).
    Protocol(String),
    /// A loss term became NaN or infinite during training.
    NonFinite { term: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse { path, line, msg } => {
                write!(f, "parse error in {path} at line {line}: {msg}")
            }
            Error::Integrity(msg) => write!(f, "integrity error: {msg}"),
            Error::EmptyOverlap => write!(f, "no user occurs in every domain"),
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Protocol(msg) => write!(f, "protocol error: {msg}"),
            Error::NonFinite { term } => {
                write!(f, "non-finite loss term `{term}`; aborting step")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
