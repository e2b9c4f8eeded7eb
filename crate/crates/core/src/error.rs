use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration, detected before any side effect.
    #[error("invalid input: {0}")]
    Usage(String),

    /// Transport failure after retries were exhausted.
    #[error("network error: {0}")]
    Network(String),

    /// A remote service answered with something we cannot interpret.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Inconsistent or malformed data (files, records, labels).
    #[error("data error: {0}")]
    Data(String),

    #[error("XML parse error in {document}: {message}")]
    Xml { document: String, message: String },

    #[error("{path}:{line}: {message}")]
    Line {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure while processing one article.
    #[error("record {pmid}: {source}")]
    Record {
        pmid: String,
        #[source]
        source: Box<Error>,
    },

    #[error("batch element {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, looking through batch and record wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Batch { source, .. } | Error::Record { source, .. } => source.root(),
            other => other,
        }
    }

    /// Whether retrying the same call could succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Network(_))
    }
}
