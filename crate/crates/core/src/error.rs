use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input is not syntactically valid (bad UTF-8 or malformed JSON).
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// The input parsed but does not follow the document schema.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an operation precondition (mixed grids, bad counts, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("submission references unknown image ids: {}", .0.join(", "))]
    UnknownImages(Vec<String>),

    #[error("fixture generation failed: {0}")]
    Generation(String),

    #[error("scene exceeds oracle limits: {0}")]
    OracleLimit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
