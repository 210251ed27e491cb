use std::path::PathBuf;

use crate::motion::AffineState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid affine state: {0}")]
    InvalidState(String),

    #[error("superpixel region {0} is empty")]
    DegenerateRegion(usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("tracking failed at frame {frame}: {reason}")]
    TrackingFailure {
        frame: usize,
        reason: String,
        last_state: AffineState,
    },

    #[error("sequence ingestion: {0}")]
    Ingest(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
