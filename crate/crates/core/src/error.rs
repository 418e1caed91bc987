use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("unsupported raster format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rectangle out of bounds: {0}")]
    OutOfBounds(String),
    #[error("scene {id}: missing {missing} image")]
    OrphanScene { id: String, missing: &'static str },
    #[error("scene {id}: manifest scale {manifest} but dimensions imply {inferred:.4}")]
    ScaleMismatch {
        id: String,
        manifest: f64,
        inferred: f64,
    },
    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("insufficient features: {found} candidate matches, need at least {needed}")]
    InsufficientFeatures { found: usize, needed: usize },
    #[error("unreliable translation estimate: inlier ratio {ratio:.3} below {min:.3}")]
    UnreliableEstimate { ratio: f64, min: f64 },
    #[error("singular calibration fit: {0}")]
    SingularFit(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
