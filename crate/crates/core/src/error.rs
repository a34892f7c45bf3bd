use std::path::PathBuf;

use crate::data::SampleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped by the exit code the command layer maps them to:
/// configuration problems (2), training failures (3) and I/O failures (4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },

    #[error("non-finite loss for batch position {position}")]
    NonFiniteLoss { position: usize },

    #[error("non-finite loss for sample {sample}")]
    NonFiniteSampleLoss { sample: SampleId },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown sample id {0}")]
    UnknownSample(SampleId),

    #[error("sample {0} has no loss observations; warm-up must precede selection")]
    EmptyHistory(SampleId),

    #[error("score for sample {0} is NaN")]
    NanScore(SampleId),

    #[error("class {class} has {size} samples, none retainable at alpha {alpha}")]
    ClassTooSmall { class: usize, size: usize, alpha: f64 },

    #[error("point ({x}, {y}) lies outside the {width}x{height} map")]
    PointOutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("corrupt file {path}: expected {expected} bytes, found {actual}")]
    CorruptFileSize {
        path: PathBuf,
        expected: String,
        actual: u64,
    },

    #[error("corrupt record in {path} at byte offset {offset}: {reason}")]
    CorruptRecord {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("bad format: {0}")]
    Format(String),

    #[error("budget of {budget}s cannot cover warm-up (estimated {estimate:.3}s)")]
    BudgetTooSmall { budget: f64, estimate: f64 },

    /// Training stopped on a failure; `manifest` records the run up to that point.
    #[error("training aborted: {source}")]
    TrainingAborted {
        source: Box<Error>,
        manifest: Box<crate::trainer::RunManifest>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("dataset fingerprints differ: {a} vs {b}")]
    FingerprintMismatch { a: String, b: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code: 2 config error, 3 runtime training error, 4 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Usage(_)
            | Error::InvalidArgument(_)
            | Error::SchemaMismatch { .. }
            | Error::FingerprintMismatch { .. } => 2,
            Error::Io { .. }
            | Error::Json(_)
            | Error::CorruptFileSize { .. }
            | Error::CorruptRecord { .. }
            | Error::Format(_) => 4,
            Error::TrainingAborted { source, .. } => match source.exit_code() {
                4 => 4,
                _ => 3,
            },
            _ => 3,
        }
    }
}
