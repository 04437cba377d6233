use std::path::PathBuf;

use iris_he_fhe::FheError;
use thiserror::Error;

use crate::segment::Circle;

#[derive(Debug, Error)]
pub enum IrisError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unsupported image: {0}")]
    Format(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("segmentation failed: {reason}")]
    Segmentation {
        reason: String,
        /// Best (pupil, iris) candidate seen, for diagnostics.
        best: Option<(Circle, Circle)>,
    },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("mask file: {0}")]
    Mask(String),
    #[error("template: {0}")]
    Template(String),
    #[error("insufficient overlap: {valid} valid bits, at least {required} required")]
    InsufficientOverlap { valid: u32, required: u32 },
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("store: {0}")]
    Store(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fhe(#[from] FheError),
}

pub type Result<T, E = IrisError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> IrisError {
    let path = path.into();
    move |source| IrisError::Io { path, source }
}
