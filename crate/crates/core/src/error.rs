use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header: {0}")]
    Header(String),
    #[error("size mismatch: expected {expected} bytes of payload, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at voxel {0}")]
    NonFinite(usize),
    #[error("value {value} outside declared range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("lossy write: {0}")]
    LossyWrite(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("unexpected artifact kind {found:?} (expected {expected:?})")]
    ArtifactKind { found: String, expected: String },
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimsMismatch([usize; 3], [usize; 3]),
    #[error("degenerate range [{0}, {1}]")]
    DegenerateRange(f64, f64),
    #[error("correlation undefined for a constant volume")]
    ConstantVolume,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty forest")]
    EmptyForest,
    #[error("nodes {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("path fully trimmed at density threshold {0}")]
    FullyTrimmed(f64),
    #[error("path too short: {0} distinct vertices")]
    PathTooShort(usize),
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
