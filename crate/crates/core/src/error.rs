use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },

    #[error("truncated payload at byte {offset}: expected {expected} samples, found {found}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("malformed payload at byte {offset}: {reason}")]
    MalformedPayload { offset: usize, reason: String },

    #[error("cannot read array file {path}: {reason}")]
    ArrayFile { path: PathBuf, reason: String },

    #[error("unsupported maxval {maxval} at byte {offset} (must be 1..=255)")]
    UnsupportedMaxval { offset: usize, maxval: u32 },

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("wedge index out of range: scale {scale}, wedge {wedge}")]
    WedgeOutOfRange { scale: usize, wedge: usize },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("{slot} feature is {found:?} but wedge ({scale},{wedge}) is {expected:?}")]
    FeatureShape {
        slot: &'static str,
        scale: usize,
        wedge: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("malformed feature file: {0}")]
    FeatureFormat(String),

    #[error("malformed sidecar: {0}")]
    Sidecar(String),

    #[error("invalid attack spec {spec:?}: {reason}")]
    AttackSpec { spec: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
