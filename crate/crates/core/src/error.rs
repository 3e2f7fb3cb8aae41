use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("no records supplied")]
    EmptyRecords,

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite log-hazard at cell ({row}, {col})")]
    NonFiniteEta { row: usize, col: usize },

    #[error("penalty constant must be non-negative and finite, got {0}")]
    InvalidKappa(f64),

    #[error("invalid penalty weights: {0}")]
    InvalidWeights(String),

    #[error("invalid statistics: {0}")]
    InvalidStats(String),

    #[error("not positive definite at index {index} (pivot {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("Hessian not positive definite: {0}")]
    HessianNotPositiveDefinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: unexpected header {found:?}, expected {expected:?}")]
    UnknownHeader {
        path: PathBuf,
        found: Vec<String>,
        expected: Vec<String>,
    },

    #[error("CV requires individual-level records; use AIC/BIC/EBIC")]
    CvRequiresRecords,

    #[error("criterion {criterion} is not available for {penalty} penalty")]
    CriterionUnavailable {
        criterion: &'static str,
        penalty: &'static str,
    },

    #[error("empty penalty grid")]
    EmptyKappaGrid,

    #[error("undefined {axis} effect at index {index}: no exposure in that {axis} interval")]
    UndefinedEffect { axis: &'static str, index: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("unknown method {0:?}")]
    UnknownMethod(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the environment (missing or unreadable files)
    /// rather than by the request itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
