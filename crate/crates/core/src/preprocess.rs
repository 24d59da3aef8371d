//! RR-interval preprocessing: outlier removal, clipping to the overlapping
//! interval of paired tracks, and exclusion of cases whose ECG/PPG mean RR
//! lengths diverge systematically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalTrack;

/// Tunables for the preprocessing stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Entries whose RR value deviates from the track mean by more than
    /// `sigma_factor` standard deviations are dropped.
    pub sigma_factor: f64,
    /// A case is excluded when |mean_rr(ecg) - mean_rr(ppg)| exceeds this
    /// threshold in milliseconds.
    pub k_ms: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            sigma_factor: 2.0,
            k_ms: 200.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "preprocess.sigma_factor must be positive, got {}",
                self.sigma_factor
            )));
        }
        if !(self.k_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "preprocess.k_ms must be positive, got {}",
                self.k_ms
            )));
        }
        Ok(())
    }
}

/// Population mean and standard deviation (divide by n) of the RR values.
fn rr_mean_std(track: &SignalTrack) -> (f64, f64) {
    let n = track.len() as f64;
    let mean = track.entries().iter().map(|e| e.rr).sum::<f64>() / n;
    let var = track
        .entries()
        .iter()
        .map(|e| {
            let d = e.rr - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// Drops entries whose RR value deviates from the track mean by more than
/// `sigma_factor` standard deviations.
///
/// Mean and standard deviation are computed once over the whole input track
/// (single pass, not re-applied iteratively). The output is a subsequence of
/// the input; span metadata is preserved.
pub fn remove_outliers(track: &SignalTrack, sigma_factor: f64) -> Result<SignalTrack> {
    if track.len() < 2 {
        return Err(Error::TooShort {
            len: track.len(),
            min: 2,
        });
    }
    let (mean, std) = rr_mean_std(track);
    let limit = sigma_factor * std;
    let kept = track
        .entries()
        .iter()
        .copied()
        .filter(|e| (e.rr - mean).abs() <= limit)
        .collect();
    SignalTrack::new(track.modality(), kept, track.start(), track.end())
}

/// Clips both tracks to their common time interval
/// `[max(starts), min(ends)]` and stamps that interval as the new span.
pub fn clip_to_overlap(
    ecg: &SignalTrack,
    ppg: &SignalTrack,
) -> Result<(SignalTrack, SignalTrack)> {
    if ecg.is_empty() || ppg.is_empty() {
        return Err(Error::EmptyTrack);
    }
    let lo = ecg.start().max(ppg.start());
    let hi = ecg.end().min(ppg.end());
    if lo > hi {
        return Err(Error::NoOverlap);
    }
    let clip = |track: &SignalTrack| {
        let range = track.index_range_inclusive(lo, hi);
        SignalTrack::new(track.modality(), track.entries()[range].to_vec(), lo, hi)
    };
    Ok((clip(ecg)?, clip(ppg)?))
}

/// Sensor-agreement rule: exclude the case when the empirical mean RR
/// lengths of the two tracks differ by strictly more than `k_ms`.
pub fn exclude_case(ecg: &SignalTrack, ppg: &SignalTrack, k_ms: f64) -> Result<bool> {
    let diff = (ecg.mean_rr()? - ppg.mean_rr()?).abs();
    Ok(diff > k_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Modality, RrEntry};

    fn track_ms(modality: Modality, rrs: &[f64]) -> SignalTrack {
        let entries = rrs
            .iter()
            .enumerate()
            .map(|(i, &rr)| RrEntry::new(800.0 * (i + 1) as f64, rr))
            .collect();
        SignalTrack::from_entries(modality, entries).unwrap()
    }

    /// Brute-force oracle: filter with independently computed moments.
    fn outlier_oracle(rrs: &[f64], f: f64) -> Vec<f64> {
        let n = rrs.len() as f64;
        let mean = rrs.iter().sum::<f64>() / n;
        let std = (rrs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        rrs.iter()
            .copied()
            .filter(|r| (r - mean).abs() <= f * std)
            .collect()
    }

    #[test]
    fn removes_single_spike() {
        let mut rrs = vec![800.0; 100];
        rrs.push(3000.0);
        let t = track_ms(Modality::Ecg, &rrs);
        let out = remove_outliers(&t, 2.0).unwrap();
        let expect = outlier_oracle(&rrs, 2.0);
        assert_eq!(out.len(), 100);
        assert_eq!(
            out.entries().iter().map(|e| e.rr).collect::<Vec<_>>(),
            expect
        );
        assert!(out.entries().iter().all(|e| e.rr == 800.0));
    }

    #[test]
    fn constant_track_unchanged() {
        let t = track_ms(Modality::Ecg, &[800.0; 50]);
        let out = remove_outliers(&t, 2.0).unwrap();
        assert_eq!(out.len(), 50);
    }

    #[test]
    fn three_point_track_unchanged() {
        // mean 800, population std ~81.65; max deviation 100 < 163.3
        let t = track_ms(Modality::Ecg, &[700.0, 800.0, 900.0]);
        let out = remove_outliers(&t, 2.0).unwrap();
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn too_short_track_errors() {
        let t = track_ms(Modality::Ecg, &[800.0]);
        assert!(matches!(
            remove_outliers(&t, 2.0),
            Err(Error::TooShort { len: 1, min: 2 })
        ));
    }

    #[test]
    fn output_is_subsequence_of_input() {
        let rrs: Vec<f64> = (0..200)
            .map(|i| 800.0 + 60.0 * ((i * 37 % 17) as f64 - 8.0))
            .collect();
        let t = track_ms(Modality::Ecg, &rrs);
        let out = remove_outliers(&t, 1.0).unwrap();
        let mut iter = t.entries().iter();
        for kept in out.entries() {
            assert!(iter.any(|e| e == kept), "output not a subsequence");
        }
    }

    fn span_track(modality: Modality, start: f64, end: f64, step: f64) -> SignalTrack {
        let mut entries = Vec::new();
        let mut t = start;
        while t <= end {
            entries.push(RrEntry::new(t, step));
            t += step;
        }
        SignalTrack::new(modality, entries, start, end).unwrap()
    }

    #[test]
    fn clip_to_intersection() {
        let ecg = span_track(Modality::Ecg, 0.0, 1_000_000.0, 800.0);
        let ppg = span_track(Modality::Ppg, 200_000.0, 1_200_000.0, 800.0);
        let (ce, cp) = clip_to_overlap(&ecg, &ppg).unwrap();
        assert_eq!(ce.start(), 200_000.0);
        assert_eq!(ce.end(), 1_000_000.0);
        assert_eq!(cp.start(), 200_000.0);
        assert_eq!(cp.end(), 1_000_000.0);
        assert!(ce.entries().iter().all(|e| e.t >= 200_000.0 && e.t <= 1_000_000.0));
        assert!(cp.entries().iter().all(|e| e.t >= 200_000.0 && e.t <= 1_000_000.0));
    }

    #[test]
    fn clip_identical_spans_is_identity() {
        let ecg = span_track(Modality::Ecg, 0.0, 100_000.0, 800.0);
        let ppg = span_track(Modality::Ppg, 0.0, 100_000.0, 820.0);
        let (ce, cp) = clip_to_overlap(&ecg, &ppg).unwrap();
        assert_eq!(ce.entries(), ecg.entries());
        assert_eq!(cp.entries(), ppg.entries());
    }

    #[test]
    fn clip_disjoint_spans_errors() {
        let ecg = span_track(Modality::Ecg, 0.0, 100_000.0, 800.0);
        let ppg = span_track(Modality::Ppg, 200_000.0, 300_000.0, 800.0);
        assert!(matches!(clip_to_overlap(&ecg, &ppg), Err(Error::NoOverlap)));
    }

    #[test]
    fn exclusion_rule_is_strictly_greater() {
        let ecg = track_ms(Modality::Ecg, &[800.0; 10]);
        let near = track_ms(Modality::Ppg, &[810.0; 10]);
        let far = track_ms(Modality::Ppg, &[1100.0; 10]);
        let boundary = track_ms(Modality::Ppg, &[1000.0; 10]);
        assert!(!exclude_case(&ecg, &near, 200.0).unwrap());
        assert!(exclude_case(&ecg, &far, 200.0).unwrap());
        // |diff| exactly k is kept: the rule reads "greater than".
        assert!(!exclude_case(&ecg, &boundary, 200.0).unwrap());
    }
}
