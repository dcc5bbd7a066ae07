use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("line count mismatch: source has {source_lines} lines, target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("{path}: line {line}: invalid UTF-8")]
    Utf8 { path: PathBuf, line: usize },

    #[error("line {line}: {message}")]
    Separator { line: usize, message: String },

    #[error("line {line}, column {column}: malformed link {token:?}")]
    MalformedLink {
        line: usize,
        column: usize,
        token: String,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("digamma is undefined for x = {0}")]
    Domain(f64),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
