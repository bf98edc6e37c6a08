use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("zero-norm vector in {context}")]
    ZeroNorm { context: String },

    #[error("non-finite value: {context}")]
    NonFinite { context: String },

    #[error("SVD of a {rows}x{cols} matrix did not converge within {max_iterations} iterations")]
    SvdNotConverged {
        rows: usize,
        cols: usize,
        max_iterations: usize,
    },

    #[error("series of length {len} is too short, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label {label} at row {row} is outside [0, {classes})")]
    LabelOutOfRange {
        row: usize,
        label: f64,
        classes: usize,
    },

    #[error("invalid query groups: {0}")]
    InvalidGroups(String),

    #[error("no query has a positive ideal DCG")]
    NoRelevantQueries,

    #[error("{path}: bad magic number, expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{path}: truncated file, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: length {len} is not a multiple of the {record}-byte record size")]
    RecordSize {
        path: PathBuf,
        len: u64,
        record: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: qid {qid} reappears after its group was closed")]
    QueryInterleaved { line: usize, qid: String },

    #[error("requested {requested} queries but only {available} are available")]
    TooFewQueries { requested: usize, available: usize },

    #[error("non-finite loss or gradient at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("trace is missing the {0} series")]
    MissingSeries(&'static str),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("fold {fold} has no evaluable held-out data")]
    EmptyFold { fold: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(
    op: &'static str,
    expected: impl ToString,
    found: impl ToString,
) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
