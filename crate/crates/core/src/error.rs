use std::path::PathBuf;

/// Errors raised by the metricscope library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("batch needs at least two samples to form a pair")]
    InsufficientPairs,

    #[error("batch contains a single class, no negatives available")]
    NoNegatives,

    #[error("no loss unit could be formed from the batch: {0}")]
    EmptyLoss(String),

    #[error("batch structure invalid: {0}")]
    BatchStructure(String),

    #[error("class {0} has no entry in the center bank")]
    UnknownClass(u32),

    #[error("class {0} has a zero-norm centroid")]
    DegenerateCentroid(u32),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("{path}: payload holds {actual} bytes, manifest implies {expected}")]
    SizeMismatch { path: PathBuf, expected: u64, actual: u64 },

    #[error("unsupported format version {0}")]
    UnknownVersion(u32),

    #[error("unsupported dtype {0:?}")]
    UnsupportedDtype(String),

    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that originate from reading or validating files.
    pub fn is_ingestion(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::SizeMismatch { .. }
                | Error::UnknownVersion(_)
                | Error::UnsupportedDtype(_)
                | Error::Malformed { .. }
                | Error::Io { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
