use std::path::PathBuf;

use thiserror::Error;

use crate::spatial::FacetKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("facet indices must be strictly increasing, got {0:?}")]
    UnsortedFacet([u32; 3]),

    #[error("nearest-neighbor query on an empty store")]
    EmptyStore,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty mesh")]
    EmptyMesh,

    #[error("attempted to erase facet {0:?} which is not in the map")]
    MissingFacet(FacetKey),

    #[error("map integrity violated: {0}")]
    Integrity(String),

    #[error("frame {index}: {reason}")]
    Frame { index: usize, reason: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
