use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed {format} data: {message}")]
    Parse {
        format: &'static str,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: {0}")]
    Mismatch(String),

    #[error("mesh has no valid faces")]
    EmptyMesh,

    #[error("unstable integration at node {node}, frame {frame}: |angle| = {angle:.4} rad")]
    Unstable {
        node: usize,
        frame: usize,
        angle: f64,
    },

    #[error("stability guard violated: {0}")]
    StabilityGuard(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn parse(format: &'static str, message: impl Into<String>) -> Self {
        Error::Parse {
            format,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True when the error describes bad input data or arguments rather
    /// than an environment or runtime failure.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::File { .. } | Error::Io(_) | Error::Unstable { .. } | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
