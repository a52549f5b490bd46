use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the constitutive-modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor is singular (det = {det:e})")]
    SingularTensor { det: f64 },

    #[error("deformation tensor has non-positive determinant ({det:e})")]
    NonPositiveDeterminant { det: f64 },

    #[error("anisotropic invariant I{index} is non-positive ({value:e})")]
    NonPositiveAnisotropicInvariant { index: usize, value: f64 },

    #[error("volume ratio J must be positive, got {0:e}")]
    NonPositiveJ(f64),

    #[error("expected {expected} network inputs, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operation requires {expected} symmetry")]
    WrongSymmetry { expected: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lateral stretch solve failed at control value {control}: {reason}")]
    NewtonDivergence { control: f64, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset too small to split ({0} tuples)")]
    DatasetTooSmall(usize),

    #[error("all data stresses are zero; relative error undefined")]
    AllZeroStress,

    #[error("hypothesis of the volumetric non-negativity check violated: {0}")]
    HypothesisViolated(String),

    #[error("{variant} run {run}: {source}")]
    StudyRun {
        variant: &'static str,
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite loss in restart {restart}")]
    NonFiniteLoss { restart: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
