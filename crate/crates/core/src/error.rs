use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the counting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {field}: {reason}")]
    Format { field: String, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("capacity error: could not place {requested} objects after {attempts} attempts; reduce the object count or the minimum separation")]
    Capacity { requested: usize, attempts: usize },

    #[error("load error in {file}{}: {reason}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Load {
        file: PathBuf,
        line: Option<usize>,
        reason: String,
    },

    #[error("training error at epoch {epoch}, batch {batch}: {reason}")]
    Training {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            reason: reason.into(),
        }
    }
}
