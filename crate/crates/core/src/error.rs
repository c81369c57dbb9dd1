use std::path::PathBuf;

/// Errors produced by the library.
///
/// The variants line up with the exit-code classes of the command-line tool:
/// configuration problems, malformed input data, and numerical failures are
/// reported separately so callers can tell them apart.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation received data of the wrong kind (e.g. multiclass labels
    /// where a binary dataset is required).
    #[error("mode error: {0}")]
    Mode(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parse error in {field}: {reason}")]
    Parse { field: String, reason: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
