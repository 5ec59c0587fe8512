use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction undefined: point coincides with the reference point")]
    DegenerateDirection,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: all points are identical")]
    DegenerateScale,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("no ray hit the mesh surface")]
    NoSurfaceHit,

    #[error("Cholesky factorization failed (jitter escalated to {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("cluster {cluster} has no training points (reference placement failed)")]
    EmptyCluster { cluster: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by files or formats rather than by the data.
    pub fn is_file_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnsupportedFormat(_)
                | Error::ModelFormat(_)
                | Error::ModelVersion { .. }
                | Error::Io { .. }
        )
    }
}
