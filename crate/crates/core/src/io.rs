//! File formats: RR-track CSV, case metadata JSON, corpus manifest,
//! PTT/offset CSV, dataset CSV, ROC CSV, and the report JSON.
//!
//! All floats are written in Rust's shortest round-trip notation, so a
//! read followed by a write reproduces a canonically written file byte for
//! byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvaluationReport, RocPoint};
use crate::features::{FeatureConfig, Sample};
use crate::signal::{Case, Modality, PttSeries, RrEntry, SeizureAnnotation, SignalTrack};
use crate::synthgen::GroundTruth;

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    t_ms: f64,
    rr_ms: f64,
}

fn read_entries(path: &Path) -> Result<Vec<RrEntry>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let row: TrackRow = row?;
        entries.push(RrEntry::new(row.t_ms, row.rr_ms));
    }
    Ok(entries)
}

/// Reads an RR-interval track (`t_ms,rr_ms` CSV); the track span is the
/// first/last entry timestamp. Case loading restores the recorded span
/// from the metadata instead.
pub fn read_track(path: &Path, modality: Modality) -> Result<SignalTrack> {
    SignalTrack::from_entries(modality, read_entries(path)?)
        .map_err(|e| Error::InvalidTrack(format!("{}: {e}", path.display())))
}

pub fn write_track(path: &Path, track: &SignalTrack) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for e in track.entries() {
        writer.serialize(TrackRow {
            t_ms: e.t,
            rr_ms: e.rr,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Recording span of one track; may extend past its first/last entry
/// (e.g. signal dropout at the edges).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpan {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl TrackSpan {
    fn of(track: &SignalTrack) -> Self {
        Self {
            start_ms: track.start(),
            end_ms: track.end(),
        }
    }
}

/// On-disk description of one case; track paths are relative to the
/// metadata file's directory. Spans live here because the track CSVs
/// only carry entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseMeta {
    pub id: String,
    pub ecg_file: String,
    pub ppg_file: String,
    pub ecg_span: TrackSpan,
    pub ppg_span: TrackSpan,
    /// Wall-clock instant of t = 0 ms.
    pub epoch_iso8601: String,
    pub seizures: Vec<SeizureAnnotation>,
}

fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    Ok(fs::write(path, json)?)
}

pub fn read_case_meta(path: &Path) -> Result<CaseMeta> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_case_meta(path: &Path, meta: &CaseMeta) -> Result<()> {
    write_json_pretty(path, meta)
}

/// Loads a case: metadata plus the two referenced track files, with the
/// recorded spans restored from the metadata.
pub fn load_case(meta_path: &Path) -> Result<Case> {
    let meta = read_case_meta(meta_path)?;
    let dir = meta_path.parent().unwrap_or_else(|| Path::new("."));
    let track = |file: &str, modality, span: TrackSpan| -> Result<SignalTrack> {
        let path = dir.join(file);
        SignalTrack::new(modality, read_entries(&path)?, span.start_ms, span.end_ms)
            .map_err(|e| Error::InvalidTrack(format!("{}: {e}", path.display())))
    };
    let ecg = track(&meta.ecg_file, Modality::Ecg, meta.ecg_span)?;
    let ppg = track(&meta.ppg_file, Modality::Ppg, meta.ppg_span)?;
    Case::new(meta.id, ecg, ppg, meta.seizures)
}

/// Stores the two tracks next to `meta_path` and then the metadata itself.
pub fn store_case(meta_path: &Path, case: &Case, epoch_iso8601: &str) -> Result<()> {
    let dir = meta_path.parent().unwrap_or_else(|| Path::new("."));
    let ecg_file = format!("{}_ecg.csv", case.id());
    let ppg_file = format!("{}_ppg.csv", case.id());
    write_track(&dir.join(&ecg_file), case.ecg())?;
    write_track(&dir.join(&ppg_file), case.ppg())?;
    write_case_meta(
        meta_path,
        &CaseMeta {
            id: case.id().to_string(),
            ecg_file,
            ppg_file,
            ecg_span: TrackSpan::of(case.ecg()),
            ppg_span: TrackSpan::of(case.ppg()),
            epoch_iso8601: epoch_iso8601.to_string(),
            seizures: case.seizures().to_vec(),
        },
    )
}

/// Corpus index: case metadata paths relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub cases: Vec<String>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_json_pretty(path, manifest)
}

/// Resolves the manifest's case paths against its directory.
pub fn manifest_case_paths(manifest_path: &Path, manifest: &Manifest) -> Vec<PathBuf> {
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    manifest.cases.iter().map(|c| dir.join(c)).collect()
}

pub fn read_groundtruth(path: &Path) -> Result<GroundTruth> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_groundtruth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_json_pretty(path, truth)
}

#[derive(Debug, Serialize, Deserialize)]
struct ValueRow {
    t_ms: f64,
    value_ms: f64,
}

fn write_value_csv(path: &Path, rows: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for (t_ms, value_ms) in rows {
        writer.serialize(ValueRow { t_ms, value_ms })?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a PTT series as `t_ms,value_ms` for plotting.
pub fn write_ptt_csv(path: &Path, series: &PttSeries) -> Result<()> {
    write_value_csv(path, series.entries().iter().map(|e| (e.t, e.ptt)))
}

/// Writes an offset trace as `t_ms,value_ms` for plotting.
pub fn write_offset_csv(path: &Path, trace: &[(f64, f64)]) -> Result<()> {
    write_value_csv(path, trace.iter().copied())
}

/// Reads a `t_ms,value_ms` CSV back as raw pairs.
pub fn read_value_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let row: ValueRow = row?;
        rows.push((row.t_ms, row.value_ms));
    }
    Ok(rows)
}

const DATASET_TAIL: [&str; 4] = ["label", "case_id", "t_center_ms", "seizure_type"];

/// Writes the training dataset with named feature columns followed by
/// `label,case_id,t_center_ms,seizure_type`; labels are 0/1 and the
/// seizure type is empty for negatives.
pub fn write_dataset(path: &Path, samples: &[Sample], cfg: &FeatureConfig) -> Result<()> {
    let names = cfg.feature_names();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(names.iter().map(String::as_str).chain(DATASET_TAIL))?;
    for s in samples {
        if s.features.len() != names.len() {
            return Err(Error::ShapeMismatch {
                expected: names.len(),
                got: s.features.len(),
            });
        }
        let mut record: Vec<String> = s.features.iter().map(|v| format!("{v}")).collect();
        record.push(if s.label { "1" } else { "0" }.to_string());
        record.push(s.case_id.clone());
        record.push(format!("{}", s.t_center_ms));
        record.push(
            s.seizure_type
                .map(|t| t.as_str().to_string())
                .unwrap_or_default(),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a dataset CSV back; every column before `label` is a feature.
pub fn read_dataset(path: &Path) -> Result<Vec<Sample>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let label_at = header
        .iter()
        .position(|c| c == "label")
        .ok_or_else(|| Error::InvalidConfig(format!("{}: no label column", path.display())))?;
    if header[label_at..] != DATASET_TAIL {
        return Err(Error::InvalidConfig(format!(
            "{}: trailing columns must be {DATASET_TAIL:?}",
            path.display()
        )));
    }
    let parse_f64 = |field: &str, row: usize| {
        field.parse::<f64>().map_err(|_| {
            Error::InvalidConfig(format!(
                "{}: row {row}: bad number {field:?}",
                path.display()
            ))
        })
    };
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::ShapeMismatch {
                expected: header.len(),
                got: record.len(),
            });
        }
        let mut features = Vec::with_capacity(label_at);
        for field in record.iter().take(label_at) {
            features.push(parse_f64(field, row)?);
        }
        let label = match &record[label_at] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{}: row {row}: bad label {other:?}",
                    path.display()
                )));
            }
        };
        let ty = &record[label_at + 3];
        samples.push(Sample {
            features,
            label,
            case_id: record[label_at + 1].to_string(),
            t_center_ms: parse_f64(&record[label_at + 2], row)?,
            seizure_type: if ty.is_empty() {
                None
            } else {
                Some(ty.parse().expect("seizure type parsing is infallible"))
            },
        });
    }
    Ok(samples)
}

/// Writes the ROC as `fpr,tpr,threshold` rows.
pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for p in points {
        writer.serialize(p)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, report: &EvaluationReport) -> Result<()> {
    write_json_pretty(path, report)
}

pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes the PTT entries produced for one case, tagging the estimator in
/// the file name stem.
pub fn ptt_csv_name(case_id: &str, kind: crate::signal::PttKind) -> String {
    match kind {
        crate::signal::PttKind::Naive => format!("{case_id}_ptt_naive.csv"),
        crate::signal::PttKind::Reactive => format!("{case_id}_ptt_reactive.csv"),
    }
}
