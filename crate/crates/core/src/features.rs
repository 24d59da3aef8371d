//! Training-pair construction and windowed statistical features over a PTT
//! series.
//!
//! A sample covers a fixed-length segment split into two or three
//! equal-duration inner windows. Per window the features are mean, min,
//! max, population variance, and the slope/intercept of the least-squares
//! line of PTT against time (re-based to the window start, in seconds);
//! the pairwise differences of the window means are appended. Vector
//! length is therefore `6 * n_windows + C(n_windows, 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{PttEntry, PttSeries, SeizureAnnotation, SeizureType};

/// Tunables for sample construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Length of one training sample in seconds.
    pub sample_len_s: f64,
    /// Number of equal-duration inner windows (2 or 3).
    pub n_windows: usize,
    /// Shift added to the seizure middle when centering positive samples,
    /// seconds. Keeps a sudden PTT change away from the inner-window seam.
    pub o_s_s: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_len_s: 480.0,
            n_windows: 2,
            o_s_s: 30.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_len_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "features.sample_len_s must be positive, got {}",
                self.sample_len_s
            )));
        }
        if self.n_windows != 2 && self.n_windows != 3 {
            return Err(Error::InvalidConfig(format!(
                "features.n_windows must be 2 or 3, got {}",
                self.n_windows
            )));
        }
        Ok(())
    }

    /// Feature vector length: six statistics per window plus one mean
    /// difference per window pair.
    pub fn feature_len(&self) -> usize {
        6 * self.n_windows + self.n_windows * (self.n_windows - 1) / 2
    }

    /// Column names in vector order, for dataset export.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_len());
        for w in 0..self.n_windows {
            for stat in ["mean", "min", "max", "var", "slope", "intercept"] {
                names.push(format!("w{w}_{stat}"));
            }
        }
        for i in 0..self.n_windows {
            for j in (i + 1)..self.n_windows {
                names.push(format!("diff_m{i}_m{j}"));
            }
        }
        names
    }
}

/// One training pair: feature vector, label, and where it came from
/// (case and segment center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// true = seizure segment.
    pub label: bool,
    pub case_id: String,
    /// Segment center, milliseconds since case epoch.
    pub t_center_ms: f64,
    pub seizure_type: Option<SeizureType>,
}

/// Per-window statistics in output order.
fn window_stats(points: &[PttEntry], window_start_ms: f64) -> [f64; 6] {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.ptt).sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for p in points {
        min = min.min(p.ptt);
        max = max.max(p.ptt);
    }
    let var = points
        .iter()
        .map(|p| {
            let d = p.ptt - mean;
            d * d
        })
        .sum::<f64>()
        / n;

    // OLS of ptt against seconds since window start (centered two-pass).
    let tmean = points
        .iter()
        .map(|p| (p.t - window_start_ms) / 1000.0)
        .sum::<f64>()
        / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let x = (p.t - window_start_ms) / 1000.0 - tmean;
        sxx += x * x;
        sxy += x * (p.ptt - mean);
    }
    // All points at one timestamp cannot happen (strictly increasing t),
    // but a degenerate two-point window with a tiny span still divides
    // through a positive sxx.
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean - slope * tmean;
    [mean, min, max, var, slope, intercept]
}

/// Computes the feature vector for a segment spanning
/// `[segment_start_ms, segment_start_ms + sample_len)`.
///
/// The segment is split into `n_windows` equal-duration half-open windows;
/// any window holding fewer than two points fails with `SparseWindow` and
/// the caller discards the sample.
pub fn window_features(
    segment: &[PttEntry],
    segment_start_ms: f64,
    sample_len_ms: f64,
    n_windows: usize,
) -> Result<Vec<f64>> {
    let window_ms = sample_len_ms / n_windows as f64;
    let mut features = Vec::with_capacity(6 * n_windows + n_windows * (n_windows - 1) / 2);
    let mut means = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let lo = segment_start_ms + window_ms * w as f64;
        let hi = segment_start_ms + window_ms * (w + 1) as f64;
        let a = segment.partition_point(|p| p.t < lo);
        let b = segment.partition_point(|p| p.t < hi);
        let points = &segment[a..b];
        if points.len() < 2 {
            return Err(Error::SparseWindow {
                window: w,
                points: points.len(),
            });
        }
        let stats = window_stats(points, lo);
        means.push(stats[0]);
        features.extend_from_slice(&stats);
    }
    for i in 0..n_windows {
        for j in (i + 1)..n_windows {
            features.push(means[i] - means[j]);
        }
    }
    Ok(features)
}

/// Builds the single positive sample for a seizure case, or `None` when the
/// segment leaves the recorded series or an inner window is too sparse.
///
/// The segment is centered on the seizure's temporal middle shifted by
/// `o_s_s` and must lie fully inside `[first, last]` series timestamps.
pub fn make_positive_sample(
    series: &PttSeries,
    seizure: &SeizureAnnotation,
    cfg: &FeatureConfig,
    case_id: &str,
) -> Result<Option<Sample>> {
    cfg.validate()?;
    let (first, last) = match (series.first_t(), series.last_t()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(None),
    };
    let sample_len_ms = cfg.sample_len_s * 1000.0;
    let t_center = seizure.middle_ms() + cfg.o_s_s * 1000.0;
    let lo = t_center - sample_len_ms / 2.0;
    let hi = t_center + sample_len_ms / 2.0;
    if lo < first || hi > last {
        return Ok(None);
    }
    let segment = series.slice(lo, hi);
    match window_features(segment, lo, sample_len_ms, cfg.n_windows) {
        Ok(features) => Ok(Some(Sample {
            features,
            label: true,
            case_id: case_id.to_string(),
            t_center_ms: t_center,
            seizure_type: Some(seizure.seizure_type),
        })),
        Err(Error::SparseWindow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Tiles a seizure-free series with consecutive non-overlapping intervals
/// of `sample_len_s` from its first timestamp and emits one negative sample
/// per full interval that passes the window-density check.
pub fn make_negative_samples(
    series: &PttSeries,
    cfg: &FeatureConfig,
    case_id: &str,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let (first, last) = match (series.first_t(), series.last_t()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Ok(Vec::new()),
    };
    let sample_len_ms = cfg.sample_len_s * 1000.0;
    let n_full = ((last - first) / sample_len_ms).floor() as usize;
    let mut samples = Vec::new();
    for k in 0..n_full {
        let lo = first + sample_len_ms * k as f64;
        let segment = series.slice(lo, lo + sample_len_ms);
        match window_features(segment, lo, sample_len_ms, cfg.n_windows) {
            Ok(features) => samples.push(Sample {
                features,
                label: false,
                case_id: case_id.to_string(),
                t_center_ms: lo + sample_len_ms / 2.0,
                seizure_type: None,
            }),
            Err(Error::SparseWindow { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::PttKind;

    fn entry(t: f64, ptt: f64) -> PttEntry {
        PttEntry { t, ptt }
    }

    /// Uniform segment: points every `step_ms` starting at `start`.
    fn uniform(start: f64, len_ms: f64, step_ms: f64, f: impl Fn(f64) -> f64) -> Vec<PttEntry> {
        let mut v = Vec::new();
        let mut t = start;
        while t < start + len_ms {
            v.push(entry(t, f(t)));
            t += step_ms;
        }
        v
    }

    #[test]
    fn constant_segment_two_windows() {
        let seg = uniform(0.0, 480_000.0, 1000.0, |_| 400.0);
        let out = window_features(&seg, 0.0, 480_000.0, 2).unwrap();
        let expect = [
            400.0, 400.0, 400.0, 0.0, 0.0, 400.0, // window 0
            400.0, 400.0, 400.0, 0.0, 0.0, 400.0, // window 1
            0.0, // mean difference
        ];
        assert_eq!(out.len(), 13);
        for (got, want) in out.iter().zip(expect) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn linear_segment_slopes_and_mean_difference() {
        // ptt = 400 + 0.5 * t_seconds; symmetric point pattern per window.
        let seg = uniform(0.0, 480_000.0, 1000.0, |t| 400.0 + 0.5 * (t / 1000.0));
        let out = window_features(&seg, 0.0, 480_000.0, 2).unwrap();
        let (w0, w1) = (&out[0..6], &out[6..12]);
        assert!((w0[4] - 0.5).abs() < 1e-9);
        assert!((w1[4] - 0.5).abs() < 1e-9);
        assert!((w0[5] - 400.0).abs() < 1e-9);
        assert!((w1[5] - 520.0).abs() < 1e-9);
        // Means 240 s apart on a 0.5 ms/s line differ by -120.
        assert!((out[12] - (-120.0)).abs() < 1e-9);
    }

    #[test]
    fn three_windows_vector_length() {
        let seg = uniform(0.0, 480_000.0, 1000.0, |_| 400.0);
        let out = window_features(&seg, 0.0, 480_000.0, 3).unwrap();
        assert_eq!(out.len(), 21);
        let cfg = FeatureConfig {
            n_windows: 3,
            ..FeatureConfig::default()
        };
        assert_eq!(cfg.feature_len(), 21);
        assert_eq!(cfg.feature_names().len(), 21);
    }

    #[test]
    fn sparse_window_is_rejected() {
        // Second half holds a single point.
        let mut seg = uniform(0.0, 240_000.0, 1000.0, |_| 400.0);
        seg.push(entry(300_000.0, 400.0));
        let err = window_features(&seg, 0.0, 480_000.0, 2).unwrap_err();
        assert!(matches!(err, Error::SparseWindow { window: 1, points: 1 }));
    }

    fn series(entries: Vec<PttEntry>) -> PttSeries {
        PttSeries::new(PttKind::Reactive, entries).unwrap()
    }

    #[test]
    fn positive_sample_centering_arithmetic() {
        // Seizure [1000 s, 1120 s], o_s = 30 s: center 1090 s, segment
        // [850 s, 1330 s).
        let s = series(uniform(0.0, 2_000_000.0, 1000.0, |_| 400.0));
        let seizure = SeizureAnnotation::new(1_000_000.0, 1_120_000.0, SeizureType::Cps).unwrap();
        let cfg = FeatureConfig::default();
        let sample = make_positive_sample(&s, &seizure, &cfg, "c0")
            .unwrap()
            .expect("sample expected");
        assert_eq!(sample.t_center_ms, 1_090_000.0);
        assert!(sample.label);
        assert_eq!(sample.seizure_type, Some(SeizureType::Cps));
        assert_eq!(sample.features.len(), 13);
    }

    #[test]
    fn positive_sample_near_edge_is_discarded() {
        // Series starts at 0 s; seizure centered 100 s in: the 8-minute
        // segment would begin before the recording.
        let s = series(uniform(0.0, 1_000_000.0, 1000.0, |_| 400.0));
        let seizure = SeizureAnnotation::new(70_000.0, 130_000.0, SeizureType::Gtcs).unwrap();
        let cfg = FeatureConfig::default();
        assert!(make_positive_sample(&s, &seizure, &cfg, "c0")
            .unwrap()
            .is_none());
    }

    #[test]
    fn zero_shift_centers_on_seizure_middle() {
        let s = series(uniform(0.0, 2_000_000.0, 1000.0, |_| 400.0));
        let seizure = SeizureAnnotation::new(900_000.0, 1_100_000.0, SeizureType::Sps).unwrap();
        let cfg = FeatureConfig {
            o_s_s: 0.0,
            ..FeatureConfig::default()
        };
        let sample = make_positive_sample(&s, &seizure, &cfg, "c0")
            .unwrap()
            .unwrap();
        assert_eq!(sample.t_center_ms, 1_000_000.0);
    }

    #[test]
    fn negative_tiling_counts() {
        // 40 minutes -> five 8-minute samples.
        let s = series(uniform(0.0, 2_400_001.0, 1000.0, |_| 400.0));
        let cfg = FeatureConfig::default();
        let samples = make_negative_samples(&s, &cfg, "c0").unwrap();
        assert_eq!(samples.len(), 5);
        // Pairwise disjoint, exact length, ordered.
        for (k, s) in samples.iter().enumerate() {
            assert_eq!(s.t_center_ms, 240_000.0 + 480_000.0 * k as f64);
            assert!(!s.label);
            assert!(s.seizure_type.is_none());
        }
    }

    #[test]
    fn short_series_yields_no_negatives() {
        let s = series(uniform(0.0, 420_000.0, 1000.0, |_| 400.0));
        let samples = make_negative_samples(&s, &FeatureConfig::default(), "c0").unwrap();
        assert!(samples.is_empty());
    }
}
