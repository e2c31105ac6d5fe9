use thiserror::Error;

/// Errors raised by the estimation pipeline.
///
/// Every variant records the name of the operation that produced it so the
/// command-line front end can surface it verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: invalid input: {msg}")]
    InvalidInput { op: &'static str, msg: String },

    #[error("{op}: {msg}")]
    Estimation { op: &'static str, msg: String },

    #[error("{op}: cannot read {path}: {source}")]
    Io {
        op: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{op}: malformed CSV: {msg}")]
    Csv { op: &'static str, msg: String },
}

impl Error {
    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidInput { op, msg: msg.into() }
    }

    pub fn estimation(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Estimation { op, msg: msg.into() }
    }

    /// Name of the operation that failed.
    pub fn op(&self) -> &'static str {
        match self {
            Error::InvalidInput { op, .. }
            | Error::Estimation { op, .. }
            | Error::Io { op, .. }
            | Error::Csv { op, .. } => op,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
