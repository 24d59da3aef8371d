//! Core domain types shared by every pipeline stage.
//!
//! All timestamps are real-valued milliseconds relative to a per-case epoch
//! (the epoch itself lives in the case metadata). Every type is immutable
//! after construction, so cases can be processed concurrently without
//! shared mutable state.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Recording modality of an RR-interval track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ecg,
    Ppg,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Ecg => write!(f, "ecg"),
            Modality::Ppg => write!(f, "ppg"),
        }
    }
}

/// One heartbeat event: occurrence time of an RR interval plus its length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrEntry {
    /// Occurrence time in milliseconds since the case epoch.
    pub t: f64,
    /// RR-interval length in milliseconds.
    pub rr: f64,
}

impl RrEntry {
    pub fn new(t: f64, rr: f64) -> Self {
        Self { t, rr }
    }
}

/// An ordered stream of [`RrEntry`] for one modality.
///
/// Entries are strictly increasing in `t` and bounded by `start`/`end`; a
/// track may be empty (e.g. after clipping) but never unsorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrack {
    modality: Modality,
    entries: Vec<RrEntry>,
    start: f64,
    end: f64,
}

impl SignalTrack {
    /// Builds a track, validating monotonicity, positive finite RR values
    /// and the `start <= first.t`, `last.t <= end` bounds.
    pub fn new(modality: Modality, entries: Vec<RrEntry>, start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() || start > end {
            return Err(Error::InvalidTrack(format!(
                "bad span [{start}, {end}]"
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if !e.t.is_finite() {
                return Err(Error::InvalidTrack(format!("non-finite t at index {i}")));
            }
            if !(e.rr > 0.0) || !e.rr.is_finite() {
                return Err(Error::InvalidTrack(format!(
                    "rr must be positive and finite, got {} at index {i}",
                    e.rr
                )));
            }
            if i > 0 && entries[i - 1].t >= e.t {
                return Err(Error::InvalidTrack(format!(
                    "timestamps not strictly increasing at index {i}: {} >= {}",
                    entries[i - 1].t,
                    e.t
                )));
            }
        }
        if let (Some(first), Some(last)) = (entries.first(), entries.last()) {
            if start > first.t || last.t > end {
                return Err(Error::InvalidTrack(format!(
                    "entries [{}, {}] exceed span [{start}, {end}]",
                    first.t, last.t
                )));
            }
        }
        Ok(Self {
            modality,
            entries,
            start,
            end,
        })
    }

    /// Builds a track whose span is exactly the first/last entry timestamp.
    pub fn from_entries(modality: Modality, entries: Vec<RrEntry>) -> Result<Self> {
        let start = entries.first().map(|e| e.t).unwrap_or(0.0);
        let end = entries.last().map(|e| e.t).unwrap_or(0.0);
        Self::new(modality, entries, start, end)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn entries(&self) -> &[RrEntry] {
        &self.entries
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Arithmetic mean of the RR-interval lengths over the whole track.
    pub fn mean_rr(&self) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::EmptyTrack);
        }
        let sum: f64 = self.entries.iter().map(|e| e.rr).sum();
        Ok(sum / self.entries.len() as f64)
    }

    /// Index range of entries with `t` in the half-open interval `[lo, hi)`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.entries.partition_point(|e| e.t < lo);
        let b = self.entries.partition_point(|e| e.t < hi);
        a..b
    }

    /// Index range of entries with `t` in the closed interval `[lo, hi]`.
    pub fn index_range_inclusive(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.entries.partition_point(|e| e.t < lo);
        let b = self.entries.partition_point(|e| e.t <= hi);
        a..b
    }
}

/// Clinical seizure types; unknown labels fall back to [`SeizureType::Other`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeizureType {
    Gtcs,
    Tonic,
    Atonic,
    Cps,
    Sps,
    Absence,
    Aura,
    Myoclonic,
    Other,
}

impl SeizureType {
    pub const ALL: [SeizureType; 9] = [
        SeizureType::Gtcs,
        SeizureType::Tonic,
        SeizureType::Atonic,
        SeizureType::Cps,
        SeizureType::Sps,
        SeizureType::Absence,
        SeizureType::Aura,
        SeizureType::Myoclonic,
        SeizureType::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SeizureType::Gtcs => "gtcs",
            SeizureType::Tonic => "tonic",
            SeizureType::Atonic => "atonic",
            SeizureType::Cps => "cps",
            SeizureType::Sps => "sps",
            SeizureType::Absence => "absence",
            SeizureType::Aura => "aura",
            SeizureType::Myoclonic => "myoclonic",
            SeizureType::Other => "other",
        }
    }
}

impl fmt::Display for SeizureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeizureType {
    type Err = std::convert::Infallible;

    /// Unknown labels map to `Other` with a warning instead of failing
    /// ingestion.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let ty = match s.to_ascii_lowercase().as_str() {
            "gtcs" => SeizureType::Gtcs,
            "tonic" => SeizureType::Tonic,
            "atonic" => SeizureType::Atonic,
            "cps" => SeizureType::Cps,
            "sps" => SeizureType::Sps,
            "absence" => SeizureType::Absence,
            "aura" => SeizureType::Aura,
            "myoclonic" => SeizureType::Myoclonic,
            "other" => SeizureType::Other,
            unknown => {
                log::warn!("unknown seizure type {unknown:?}, mapping to \"other\"");
                SeizureType::Other
            }
        };
        Ok(ty)
    }
}

impl Serialize for SeizureType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SeizureType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().expect("seizure type parsing is infallible"))
    }
}

/// An annotated seizure interval on the ECG clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeizureAnnotation {
    pub start_ms: f64,
    pub end_ms: f64,
    #[serde(rename = "type")]
    pub seizure_type: SeizureType,
}

impl SeizureAnnotation {
    pub fn new(start_ms: f64, end_ms: f64, seizure_type: SeizureType) -> Result<Self> {
        if !start_ms.is_finite() || !end_ms.is_finite() || start_ms >= end_ms {
            return Err(Error::InvalidCase(format!(
                "seizure annotation must satisfy start < end, got [{start_ms}, {end_ms}]"
            )));
        }
        Ok(Self {
            start_ms,
            end_ms,
            seizure_type,
        })
    }

    pub fn middle_ms(&self) -> f64 {
        0.5 * (self.start_ms + self.end_ms)
    }
}

/// A paired ECG+PPG recording with optional seizure annotations; the
/// pipeline's unit of work.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    id: String,
    ecg: SignalTrack,
    ppg: SignalTrack,
    seizures: Vec<SeizureAnnotation>,
}

impl Case {
    pub fn new(
        id: impl Into<String>,
        ecg: SignalTrack,
        ppg: SignalTrack,
        seizures: Vec<SeizureAnnotation>,
    ) -> Result<Self> {
        let id = id.into();
        if ecg.modality() != Modality::Ecg || ppg.modality() != Modality::Ppg {
            return Err(Error::InvalidCase(format!(
                "case {id}: track modalities are swapped or duplicated"
            )));
        }
        let span_lo = ecg.start().min(ppg.start());
        let span_hi = ecg.end().max(ppg.end());
        for s in &seizures {
            if s.start_ms < span_lo || s.end_ms > span_hi {
                return Err(Error::InvalidCase(format!(
                    "case {id}: seizure [{}, {}] outside recorded span [{span_lo}, {span_hi}]",
                    s.start_ms, s.end_ms
                )));
            }
        }
        Ok(Self {
            id,
            ecg,
            ppg,
            seizures,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ecg(&self) -> &SignalTrack {
        &self.ecg
    }

    pub fn ppg(&self) -> &SignalTrack {
        &self.ppg
    }

    pub fn seizures(&self) -> &[SeizureAnnotation] {
        &self.seizures
    }

    pub fn has_seizure(&self) -> bool {
        !self.seizures.is_empty()
    }

    /// First annotated seizure by start time, if any.
    pub fn first_seizure(&self) -> Option<&SeizureAnnotation> {
        self.seizures
            .iter()
            .min_by(|a, b| a.start_ms.total_cmp(&b.start_ms))
    }
}

/// Which estimator produced a PTT series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PttKind {
    /// Direct per-beat subtraction; absolute values, drift included.
    Naive,
    /// Windowed, offset-compensated values; relative alterations only.
    Reactive,
}

/// One time-stamped PTT value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PttEntry {
    pub t: f64,
    pub ptt: f64,
}

/// Time-stamped PTT values, strictly increasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PttSeries {
    kind: PttKind,
    entries: Vec<PttEntry>,
}

impl PttSeries {
    pub fn new(kind: PttKind, entries: Vec<PttEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !e.t.is_finite() || !e.ptt.is_finite() {
                return Err(Error::InvalidTrack(format!(
                    "non-finite PTT entry at index {i}"
                )));
            }
            if kind == PttKind::Naive && e.ptt <= 0.0 {
                return Err(Error::InvalidTrack(format!(
                    "naive PTT must be positive, got {} at index {i}",
                    e.ptt
                )));
            }
            if i > 0 && entries[i - 1].t >= e.t {
                return Err(Error::InvalidTrack(format!(
                    "PTT timestamps not strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { kind, entries })
    }

    pub fn kind(&self) -> PttKind {
        self.kind
    }

    pub fn entries(&self) -> &[PttEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_t(&self) -> Option<f64> {
        self.entries.first().map(|e| e.t)
    }

    pub fn last_t(&self) -> Option<f64> {
        self.entries.last().map(|e| e.t)
    }

    /// Entries with `t` in the half-open interval `[lo, hi)`.
    pub fn slice(&self, lo: f64, hi: f64) -> &[PttEntry] {
        let a = self.entries.partition_point(|e| e.t < lo);
        let b = self.entries.partition_point(|e| e.t < hi);
        &self.entries[a..b]
    }
}
