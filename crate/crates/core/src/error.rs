use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate projection: point mapped to infinity")]
    DegenerateProjection,

    #[error("label `{0}` is already enrolled")]
    Conflict(String),

    #[error("insufficient features: found {found}, need at least {needed}")]
    InsufficientFeatures { found: usize, needed: usize },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("unsupported format version {0}")]
    Version(u8),

    #[error("extraction parameters do not match the registry")]
    ParamsMismatch,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing template images: {}", .0.join(", "))]
    MissingTemplates(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode error: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
