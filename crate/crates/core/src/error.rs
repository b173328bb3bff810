use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("passivity violation: Im(eps) = {imag} < 0")]
    PassivityViolation { imag: f64 },

    #[error("fit residual {residual:.4} exceeds threshold {threshold:.4}")]
    FitQuality { residual: f64, threshold: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("field diverged at step {step}")]
    Divergence { step: usize },

    #[error("wavelength {requested} nm is not monitored (available: {available:?})")]
    UnmonitoredWavelength { requested: f64, available: Vec<f64> },

    #[error("at wavelength {wavelength_nm} nm: {source}")]
    AtWavelength {
        wavelength_nm: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate feature '{0}': zero variance")]
    DegenerateFeature(String),

    #[error("unknown category '{0}'")]
    Encoding(String),

    #[error("cannot impute series {0}: fewer than two valid records")]
    Imputation(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error("shape mismatch in {layer}: expected {expected}, got {got}")]
    Shape {
        layer: String,
        expected: usize,
        got: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDivergence { epoch: usize, batch: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("invalid feature grouping: {0}")]
    Grouping(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
