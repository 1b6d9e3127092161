use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid norm exponent {0}: must be at least 1")]
    InvalidExponent(f64),

    #[error("point set must contain at least one point")]
    EmptySet,

    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate point id {0}")]
    DuplicateId(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mazur radius violated: |x - z|_p = {norm} exceeds C0 = {c0}")]
    RadiusViolation { norm: f64, c0: f64 },

    #[error("subset diameter {diameter} exceeds bound {bound}")]
    DiameterExceeded { diameter: f64, bound: f64 },

    #[error("cluster {cluster} has diameter {diameter}, above delta {delta}")]
    ClusterTooWide { cluster: usize, diameter: f64, delta: f64 },

    #[error("unknown {what}: {value}")]
    Unknown { what: &'static str, value: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
