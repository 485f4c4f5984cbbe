use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column `{0}` not found in header")]
    MissingColumn(String),

    #[error("cannot parse `{value}` at row {row}, column `{column}` as a finite number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset contains a single class ({positives} positive, {negatives} negative)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("empty dataset")]
    Empty,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {label} has {count} samples, too few for this operation")]
    ClassTooSmall { label: i8, count: usize },

    #[error("target of {target} majority samples exceeds the {available} available")]
    TargetExceedsAvailable { target: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("delta {delta} outside the open interval of its case")]
    DeltaOutOfRange { delta: f64 },

    #[error("kernel matrix does not match the supplied kernel and training data")]
    KernelMismatch,

    #[error("model has no separating hyperplane (all dual coefficients are zero)")]
    DegenerateModel,

    #[error(
        "all minority support vectors classified as noise; try a larger k or a different kernel"
    )]
    AllNoise,

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::Parse { .. }
                | Error::SingleClass { .. }
                | Error::Empty
                | Error::InvalidDataset(_)
                | Error::ClassTooSmall { .. }
                | Error::TargetExceedsAvailable { .. }
        )
    }
}
