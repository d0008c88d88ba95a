use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside an operation's domain (a sieve bound below 2,
    /// weights that do not sum to one, an instance below 2, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A value exceeded the range a table was built for.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// The request exceeds a structural or configured capacity
    /// (not enough sieved primes, candidate set too large, ...).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An experiment or CLI configuration failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// An I/O failure, annotated with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn out_of_range(msg: impl Into<String>) -> Self {
        Error::OutOfRange(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
