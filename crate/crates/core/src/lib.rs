//! Seizure detection over pulse-transit-time (PTT) estimates.
//!
//! The crate processes paired ECG/PPG RR-interval streams: per-track outlier
//! removal and overlap clipping, PTT estimation with clock-drift
//! compensation, windowed statistical feature extraction, a bagged-CART
//! random forest, and the clinical outcome metrics used to judge a detector
//! (sensitivity, specificity, precision, F1, ROC/AUC, false-alarm rate,
//! detection latency).
//!
//! A deterministic synthetic generator ([`synthgen`]) provides paired tracks
//! with known ground truth, so every stage can be verified end to end
//! without clinical data.
//!
//! Pipeline order: [`preprocess`] -> [`ptt`] -> [`features`] ->
//! [`classifier`] -> [`eval`], orchestrated per corpus by [`pipeline`].

pub mod classifier;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod ptt;
pub mod signal;
pub mod synthgen;

pub use error::{Error, Result};
