use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file while reading {field}")]
    TruncatedFile { field: &'static str },

    #[error("invariant violated on `{field}`: {reason}")]
    InvariantViolation { field: &'static str, reason: String },

    #[error("i/o failure on {path:?}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("requested {requested} rows but only {available} available")]
    CountOverflow { requested: usize, available: usize },

    #[error("vector norm is zero (below 1e-30)")]
    ZeroVector,

    #[error("class {0} has no training samples")]
    EmptyClass(usize),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row is not a probability simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },

    #[error("k = {k} exceeds the {n} available reference rows")]
    KTooLarge { k: usize, n: usize },

    #[error("need at least 2 members, got {0}")]
    TooFewMembers(usize),

    #[error("Dirichlet concentration {0} is below 1")]
    AlphaBelowOne(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("feature set `{0}` has no logits")]
    MissingLogits(String),

    #[error("feature set `{0}` has no labels")]
    MissingLabels(String),

    #[error("label {label} at row {row} outside [0, {classes})")]
    BadLabel { row: usize, label: i64, classes: usize },

    #[error("calibration file {0:?} is also used for evaluation")]
    SameFileForCalibAndEval(PathBuf),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("score rule `{rule}` needs {what}")]
    MissingInput { rule: &'static str, what: String },
}

impl Error {
    pub(crate) fn invariant(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvariantViolation { field, reason: reason.into() }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure { path: path.into(), source }
    }

    /// True for failures that stem from numerics rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite | Error::NotSymmetric(_) | Error::NonFiniteInput(_)
        )
    }
}
