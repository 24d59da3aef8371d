//! Error type shared across the pipeline stages.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("track is empty")]
    EmptyTrack,

    #[error("track too short: {len} entries, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("tracks do not overlap")]
    NoOverlap,

    #[error("inner window {window} holds {points} points, need at least 2")]
    SparseWindow { window: usize, points: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("class {label} has {count} samples, fewer than {folds} folds")]
    TooFewPerClass {
        label: u8,
        count: usize,
        folds: usize,
    },

    #[error("empty hyperparameter range: {0}")]
    EmptyRange(&'static str),

    #[error("invalid observation duration: {0} hours")]
    InvalidDuration(f64),

    #[error("detection latency would be negative: sample_len {sample_len_s} s, shift {o_s_s} s")]
    InvalidLatencyConfig { sample_len_s: f64, o_s_s: f64 },

    #[error("every case was excluded during preprocessing")]
    EmptyCorpusAfterExclusion,

    #[error("invalid track: {0}")]
    InvalidTrack(String),

    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unsupported model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
