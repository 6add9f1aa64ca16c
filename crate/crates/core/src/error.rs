use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("header does not match schema, missing column(s): {}", missing.join(", "))]
    HeaderMismatch { missing: Vec<String> },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparseableNumber {
        row: u64,
        column: String,
        value: String,
    },

    #[error("row {row}: label `{value}` is neither `{negative}` nor `{positive}`")]
    UnknownLabel {
        row: u64,
        value: String,
        negative: String,
        positive: String,
    },

    #[error("feature `{feature}`: unseen category `{value}`")]
    UnknownCategory { feature: String, value: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("class {label} has {available} training rows, need at least {needed}")]
    InsufficientClass {
        label: u8,
        available: usize,
        needed: usize,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("rankings are over different feature sets: {0}")]
    MismatchedUniverse(String),

    #[error("k = {k} is outside 1..={features}")]
    TopKOutOfRange { k: usize, features: usize },

    #[error("KL divergence undefined: q[{index}] = 0 while p[{index}] > 0")]
    UndefinedDivergence { index: usize },

    #[error("committee needs at least {min} members, got {got}")]
    CommitteeTooSmall { min: usize, got: usize },

    #[error("pool is empty")]
    EmptyPool,

    #[error("oracle training set contains a single class")]
    SingleClassOracle,

    #[error("paired t-test needs two equal-length series of at least 2 points (got {a} and {b})")]
    InvalidSeries { a: usize, b: usize },

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
