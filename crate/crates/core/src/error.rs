use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode of the library.
///
/// [`Error::category`] folds these into the three buckets the CLI reports
/// through its exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema violation in relation `{relation}`: edge ({src}, {dst}) is out of range")]
    EdgeOutOfRange {
        relation: String,
        src: usize,
        dst: usize,
    },
    #[error("meta-path error: {0}")]
    MetaPath(String),
    #[error("index {index} out of range for {len} nodes")]
    Index { index: usize, len: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("validation error in {}:{line}: {message}", file.display())]
    Validation {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::Shape(_)
            | Error::Contract(_)
            | Error::Checkpoint(_)
            | Error::Index { .. } => ErrorCategory::Config,
            Error::Numeric(_) | Error::Divergence { .. } => ErrorCategory::Numeric,
            Error::Schema(_)
            | Error::EdgeOutOfRange { .. }
            | Error::MetaPath(_)
            | Error::MissingFile(_)
            | Error::Validation { .. }
            | Error::Dimension(_)
            | Error::Stratification(_)
            | Error::Io { .. }
            | Error::Json { .. } => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
