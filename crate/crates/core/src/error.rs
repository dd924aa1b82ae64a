use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input: files, schemas, configs, requests.
    Input,
    /// Numerically degenerate data (constant series, zero norms, ...).
    Numeric,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("row {row} sums to {sum}, which is more than 1e-4 away from 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("label on line {line} is negative: {value}")]
    NegativeLabel { line: usize, value: i64 },

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("manifest schema error: {0}")]
    Schema(String),

    #[error("duplicate model id `{0}`")]
    DuplicateModelId(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("class subset is empty")]
    EmptySubset,

    #[error("invalid class subset: {0}")]
    InvalidSubset(String),

    #[error("row {row} has zero probability mass on the class subset")]
    ZeroRowMass { row: usize },

    #[error("dimension mismatch ({what}): expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("reference class distribution has zero norm")]
    ZeroReferenceNorm,

    #[error("invalid class distribution: {0}")]
    InvalidDistribution(String),

    #[error("series `{0}` is constant")]
    ConstantSeries(&'static str),

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least 2 paired observations, got {0}")]
    TooFewObservations(usize),

    #[error("all x values are equal; cannot fit a line")]
    DegenerateX,

    #[error("non-finite input: {0}")]
    NonFinite(f64),

    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),

    #[error("measure `{measure}` requires `{field}` in the manifest")]
    MissingSideInput { measure: String, field: String },

    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("fraction {fraction} of {samples} samples leaves fewer than 2 samples")]
    SubsampleTooSmall { fraction: f64, samples: usize },

    #[error("{}: {source}", .path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InFile { source, .. } => source.kind(),
            Error::ZeroReferenceNorm
            | Error::ConstantSeries(_)
            | Error::DegenerateX
            | Error::NonFinite(_)
            | Error::ZeroRowMass { .. } => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Other,
            _ => ErrorKind::Input,
        }
    }

    /// Strips file context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
