use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Rough category of an [`Error`], used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("index {index} out of range for vocabulary of size {bound}")]
    Index { index: usize, bound: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("undefined correlation: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a model file (bad magic bytes)")]
    NotAModelFile,

    #[error("unsupported model format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("truncated model file: {0}")]
    Truncated(String),

    #[error("malformed model header: {0}")]
    BadHeader(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::Shape {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps this error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any [`Error::Context`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::Usage(_) | Error::Config(_) | Error::Argument(_) => ErrorKind::Usage,
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Csv { .. }
            | Error::Io { .. }
            | Error::NotAModelFile
            | Error::UnsupportedVersion { .. }
            | Error::Truncated(_)
            | Error::BadHeader(_) => ErrorKind::Data,
            Error::Shape { .. }
            | Error::Index { .. }
            | Error::UndefinedCorrelation(_)
            | Error::Numeric(_) => ErrorKind::Runtime,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}
