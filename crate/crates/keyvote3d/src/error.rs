//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite coordinate encountered")]
    NonFinite,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate line bundle (condition number {cond:.3e} exceeds {limit:.1e})")]
    DegenerateLines { cond: f64, limit: f64 },

    #[error("all {attempted} RANSAC triplets were degenerate")]
    AllHypothesesDegenerate { attempted: usize },

    #[error("keypoint {index}: {source}")]
    AtKeypoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate correspondences: {0}")]
    DegenerateCorrespondences(String),

    #[error("need at least 3 correspondences with positive weight, got {got}")]
    InsufficientWeight { got: usize },

    #[error("every keypoint confidence is zero")]
    AllZeroConfidence,

    #[error("fewer than 3 scene points survive occlusion ({survivors} left)")]
    DegenerateScene { survivors: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    MagicMismatch { expected: String, found: String },

    #[error("file truncated: needed {needed} bytes for {what}, got {got}")]
    TruncatedFile {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error("vector norm {norm} deviates from unit by more than {tolerance}")]
    NormViolation { norm: f64, tolerance: f64 },

    #[error("not a rotation matrix: {0}")]
    NotARotation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an error with the keypoint index it occurred at.
    pub(crate) fn at_keypoint(self, index: usize) -> Self {
        Error::AtKeypoint {
            index,
            source: Box::new(self),
        }
    }
}
