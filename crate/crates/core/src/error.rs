use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// File access and malformed input data.
    Input,
    /// Arguments or configuration outside a function's contract.
    Invalid,
    /// Solver non-convergence or training divergence.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: expected header `{expected}`, found `{found}`")]
    MalformedHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: line {line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate rows for {year} day {doy}")]
    DuplicateDay { year: i32, doy: u32 },

    #[error("duplicate bloom event for year {0}")]
    DuplicateBloomYear(i32),

    #[error("invalid calendar date {year:04}-{month:02}-{day:02}")]
    InvalidDate { year: i32, month: u32, day: u32 },

    #[error("{year} day {doy}: average temperature missing and cannot be imputed from extremes")]
    Unimputable { year: i32, doy: u32 },

    #[error("statistics of an empty window")]
    EmptyWindow,

    #[error("class {0} has a zero count; its weight is undefined")]
    EmptyClass(usize),

    #[error("SMOTE needs at least 2 samples of class {class}, found {count}")]
    TooFewForSmote { class: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "SMO did not converge after {iterations} iterations \
         (objective {objective:.6e}, {violations} KKT violations)"
    )]
    NotConverged {
        iterations: usize,
        objective: f64,
        violations: usize,
    },

    #[error("sub-classifier {pos} vs {neg}: {source}")]
    PairFailed {
        pos: usize,
        neg: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("no positive samples for the precision-recall sweep")]
    NoPositives,

    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::MalformedHeader { .. }
            | Error::MalformedRow { .. }
            | Error::DuplicateDay { .. }
            | Error::DuplicateBloomYear(_)
            | Error::Unimputable { .. }
            | Error::FormatVersion { .. }
            | Error::Serde(_) => ErrorKind::Input,
            Error::NotConverged { .. } | Error::NonFinite(_) | Error::Diverged { .. } => {
                ErrorKind::Numeric
            }
            Error::PairFailed { source, .. } => source.kind(),
            _ => ErrorKind::Invalid,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
