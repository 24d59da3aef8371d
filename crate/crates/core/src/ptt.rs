//! Pulse-transit-time estimation from paired RR-interval tracks.
//!
//! Two estimators are provided. [`naive_ptt`] subtracts matched ECG/PPG
//! beat timestamps directly; it is exact on drift-free tracks but the
//! growing clock offset between two independently-clocked recorders leaks
//! straight into its output. [`reactive_ptt`] wraps the naive estimator in
//! a sliding window and keeps a running offset on the PPG timestamps so
//! that windowed PTT values stay centered in the middle of the ECG RR
//! interval; the offset absorbs the clock drift while short-lived PTT
//! alterations still show up as transients in the output.
//!
//! The compensation strength is set by the divisor `c`: each emitted window
//! mean `w` moves the cumulative offset by `(mean_rr/2 - w) / c`. Large `c`
//! removes little drift per step (transients survive longer, drift lingers),
//! small `c` re-centers aggressively (drift vanishes, but so do slow PTT
//! alterations).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{PttEntry, PttKind, PttSeries, RrEntry, SignalTrack};

/// Tunables for the drift-compensating estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactiveConfig {
    /// Forward-looking window length in seconds.
    pub window_len_s: f64,
    /// Drift-removal divisor; higher values remove less drift per step.
    pub c: f64,
    /// Minimum fraction of the expected entry count that must be present in
    /// a window, for both tracks, before a data point is emitted.
    pub availability_frac: f64,
    /// Number of ECG entries between successive window evaluations.
    pub stride: usize,
}

impl Default for ReactiveConfig {
    fn default() -> Self {
        Self {
            window_len_s: 300.0,
            c: 10.0,
            availability_frac: 0.2,
            stride: 1,
        }
    }
}

impl ReactiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_len_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "reactive.window_len_s must be positive, got {}",
                self.window_len_s
            )));
        }
        if !(self.c >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "reactive.c must be at least 1, got {}",
                self.c
            )));
        }
        if !(self.availability_frac > 0.0 && self.availability_frac <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "reactive.availability_frac must be in (0, 1], got {}",
                self.availability_frac
            )));
        }
        if self.stride < 1 {
            return Err(Error::InvalidConfig(
                "reactive.stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cumulative PPG offset recorded after each window evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetPoint {
    pub t: f64,
    pub cumulative_offset: f64,
}

/// The offset trajectory of one reactive run; under pure clock drift it
/// tracks the negated drift.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OffsetTrace {
    points: Vec<OffsetPoint>,
}

impl OffsetTrace {
    pub fn points(&self) -> &[OffsetPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push(&mut self, t: f64, cumulative_offset: f64) {
        debug_assert!(self.points.last().map_or(true, |p| p.t < t));
        self.points.push(OffsetPoint {
            t,
            cumulative_offset,
        });
    }
}

/// Matches each ECG entry with the PPG entry that directly follows it and
/// emits their timestamp difference.
///
/// For an ECG entry `(t_ecg, rr_ecg)` the candidate is the first PPG entry
/// with `t_ppg > t_ecg` that still precedes the next ECG entry. The pair is
/// dropped when `t_ppg - t_ecg > rr_ecg`, so every emitted value satisfies
/// `0 < ptt <= rr_ecg` and each ECG entry yields at most one entry.
pub fn naive_ptt(ecg: &SignalTrack, ppg: &SignalTrack) -> Result<PttSeries> {
    let entries = match_entries(ecg.entries(), ppg.entries(), 0.0);
    PttSeries::new(PttKind::Naive, entries)
}

/// Core matcher shared by the naive estimator and the windowed evaluation:
/// `ppg_shift` is added to every PPG timestamp before matching. The end of
/// the ECG slice is treated as open (no next-entry bound for the last one).
fn match_entries(ecg: &[RrEntry], ppg: &[RrEntry], ppg_shift: f64) -> Vec<PttEntry> {
    let mut out = Vec::new();
    let mut j = 0usize;
    for (i, e) in ecg.iter().enumerate() {
        while j < ppg.len() && ppg[j].t + ppg_shift <= e.t {
            j += 1;
        }
        if j == ppg.len() {
            break;
        }
        let t_ppg = ppg[j].t + ppg_shift;
        if let Some(next) = ecg.get(i + 1) {
            if t_ppg >= next.t {
                continue;
            }
        }
        let ptt = t_ppg - e.t;
        if ptt > e.rr {
            continue;
        }
        out.push(PttEntry { t: e.t, ptt });
    }
    out
}

/// Windowed, drift-compensated PTT estimation.
///
/// Iterates over the ECG entries in steps of `cfg.stride`. At each
/// evaluation point the next `window_len_s` seconds of both tracks are
/// matched with the current cumulative offset applied to the PPG
/// timestamps. When both tracks hold at least `availability_frac` of their
/// expected entry count, the mean of the window's matched PTT values is
/// emitted and the offset moves by `(mean_rr(ecg)/2 - mean) / c`. Starved
/// windows emit nothing and leave the offset unchanged. The returned trace
/// records the cumulative offset after every evaluation.
pub fn reactive_ptt(
    ecg: &SignalTrack,
    ppg: &SignalTrack,
    cfg: &ReactiveConfig,
) -> Result<(PttSeries, OffsetTrace)> {
    cfg.validate()?;
    let mean_rr_ecg = ecg.mean_rr()?;
    let mean_rr_ppg = ppg.mean_rr()?;
    let window_ms = cfg.window_len_s * 1000.0;
    let expected_ecg = window_ms / mean_rr_ecg;
    let expected_ppg = window_ms / mean_rr_ppg;

    let mut offset = 0.0f64;
    let mut series = Vec::new();
    let mut trace = OffsetTrace::default();

    let ecg_entries = ecg.entries();
    let ppg_entries = ppg.entries();
    let mut idx = 0usize;
    while idx < ecg_entries.len() {
        let t_eval = ecg_entries[idx].t;
        let hi = t_eval + window_ms;

        let ecg_range = ecg.index_range(t_eval, hi);
        // Shifted PPG timestamps must land in [t_eval, hi).
        let ppg_range = ppg.index_range(t_eval - offset, hi - offset);

        let ecg_win = &ecg_entries[ecg_range];
        let ppg_win = &ppg_entries[ppg_range];

        let available = ecg_win.len() as f64 >= cfg.availability_frac * expected_ecg
            && ppg_win.len() as f64 >= cfg.availability_frac * expected_ppg;

        if available {
            let matched = match_entries(ecg_win, ppg_win, offset);
            if !matched.is_empty() {
                let w_ptt =
                    matched.iter().map(|p| p.ptt).sum::<f64>() / matched.len() as f64;
                series.push(PttEntry {
                    t: t_eval,
                    ptt: w_ptt,
                });
                offset += (mean_rr_ecg / 2.0 - w_ptt) / cfg.c;
            }
        }
        trace.push(t_eval, offset);
        idx += cfg.stride;
    }

    Ok((PttSeries::new(PttKind::Reactive, series)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Modality;

    fn ecg_track(beats: &[(f64, f64)]) -> SignalTrack {
        let entries = beats.iter().map(|&(t, rr)| RrEntry::new(t, rr)).collect();
        SignalTrack::from_entries(Modality::Ecg, entries).unwrap()
    }

    fn ppg_track(beats: &[(f64, f64)]) -> SignalTrack {
        let entries = beats.iter().map(|&(t, rr)| RrEntry::new(t, rr)).collect();
        SignalTrack::from_entries(Modality::Ppg, entries).unwrap()
    }

    /// Regular tracks: ECG beats every `rr` ms starting at `rr`, PPG
    /// arriving `ptt` ms later.
    fn regular_pair(n: usize, rr: f64, ptt: f64) -> (SignalTrack, SignalTrack) {
        let ecg: Vec<(f64, f64)> = (1..=n).map(|i| (rr * i as f64, rr)).collect();
        let ppg: Vec<(f64, f64)> = (1..=n).map(|i| (rr * i as f64 + ptt, rr)).collect();
        (ecg_track(&ecg), ppg_track(&ppg))
    }

    #[test]
    fn direct_subtraction() {
        let ecg = ecg_track(&[(0.0, 1000.0)]);
        let ppg = ppg_track(&[(200.0, 1000.0)]);
        let out = naive_ptt(&ecg, &ppg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.entries()[0].t, 0.0);
        assert_eq!(out.entries()[0].ptt, 200.0);
    }

    #[test]
    fn discards_when_gap_exceeds_rr() {
        let ecg = ecg_track(&[(0.0, 1000.0)]);
        let ppg = ppg_track(&[(1200.0, 1000.0)]);
        let out = naive_ptt(&ecg, &ppg).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ppg_after_next_ecg_entry_is_not_matched() {
        // PPG at 1700 belongs to the second ECG entry, not the first.
        let ecg = ecg_track(&[(0.0, 2000.0), (1500.0, 1500.0)]);
        let ppg = ppg_track(&[(1700.0, 1500.0)]);
        let out = naive_ptt(&ecg, &ppg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.entries()[0].t, 1500.0);
        assert_eq!(out.entries()[0].ptt, 200.0);
    }

    #[test]
    fn recovers_constant_ptt_exactly() {
        let (ecg, ppg) = regular_pair(2000, 800.0, 250.0);
        let out = naive_ptt(&ecg, &ppg).unwrap();
        assert_eq!(out.len(), 2000);
        for e in out.entries() {
            assert!((e.ptt - 250.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn fixed_point_is_half_mean_rr() {
        // 30 minutes of clean 75 bpm data with constant true PTT.
        let n = 30 * 60 * 1000 / 800;
        let (ecg, ppg) = regular_pair(n, 800.0, 250.0);
        let cfg = ReactiveConfig::default();
        let (series, trace) = reactive_ptt(&ecg, &ppg, &cfg).unwrap();
        assert!(!series.is_empty());
        // After burn-in the output sits at mean_rr/2 and increments vanish.
        let burn_in_ms = 600_000.0;
        for e in series.entries().iter().filter(|e| e.t >= burn_in_ms) {
            assert!(
                (e.ptt - 400.0).abs() < 1.0,
                "t={} ptt={} expected 400",
                e.t,
                e.ptt
            );
        }
        let post: Vec<_> = trace
            .points()
            .iter()
            .filter(|p| p.t >= burn_in_ms)
            .collect();
        for w in post.windows(2) {
            assert!((w[1].cumulative_offset - w[0].cumulative_offset).abs() < 0.01);
        }
    }

    #[test]
    fn starved_window_emits_nothing_and_keeps_offset() {
        // 10 ECG beats at 800 ms but only one PPG beat: PPG availability in
        // a 8-second window is 1/10 = 10% < 20%.
        let ecg: Vec<(f64, f64)> = (1..=10).map(|i| (800.0 * i as f64, 800.0)).collect();
        let ecg = ecg_track(&ecg);
        let ppg = ppg_track(&[(1050.0, 800.0)]);
        let cfg = ReactiveConfig {
            window_len_s: 8.0,
            ..ReactiveConfig::default()
        };
        let (series, trace) = reactive_ptt(&ecg, &ppg, &cfg).unwrap();
        assert!(series.is_empty());
        assert!(trace.points().iter().all(|p| p.cumulative_offset == 0.0));
        // One trace point per evaluation, pass or fail.
        assert_eq!(trace.len(), 10);
    }

    #[test]
    fn stride_reduces_evaluation_points() {
        let (ecg, ppg) = regular_pair(1000, 800.0, 250.0);
        let cfg = ReactiveConfig {
            stride: 10,
            ..ReactiveConfig::default()
        };
        let (_, trace) = reactive_ptt(&ecg, &ppg, &cfg).unwrap();
        assert_eq!(trace.len(), 100);
    }

    #[test]
    fn huge_c_reproduces_windowed_naive_means() {
        // With c ~ 1e9 offset increments are negligible, so every emitted
        // value must equal the plain windowed mean of the naive estimator.
        let n = 20 * 60 * 1000 / 800;
        let mut ecg = Vec::new();
        let mut ppg = Vec::new();
        // Mild deterministic wobble so windows are not all identical.
        for i in 1..=n {
            let t = 800.0 * i as f64;
            let wob = 18.0 * ((i % 7) as f64 - 3.0);
            ecg.push((t, 800.0));
            ppg.push((t + 250.0 + wob, 800.0));
        }
        let ecg = ecg_track(&ecg);
        let ppg = ppg_track(&ppg);
        let cfg = ReactiveConfig {
            c: 1e9,
            ..ReactiveConfig::default()
        };
        let (series, _) = reactive_ptt(&ecg, &ppg, &cfg).unwrap();
        assert!(!series.is_empty());
        let window_ms = cfg.window_len_s * 1000.0;
        for e in series.entries() {
            let er = ecg.index_range(e.t, e.t + window_ms);
            let pr = ppg.index_range(e.t, e.t + window_ms);
            let sub_ecg = SignalTrack::from_entries(
                Modality::Ecg,
                ecg.entries()[er].to_vec(),
            )
            .unwrap();
            let sub_ppg = SignalTrack::from_entries(
                Modality::Ppg,
                ppg.entries()[pr].to_vec(),
            )
            .unwrap();
            let win = naive_ptt(&sub_ecg, &sub_ppg).unwrap();
            let mean =
                win.entries().iter().map(|p| p.ptt).sum::<f64>() / win.len() as f64;
            assert!(
                (e.ptt - mean).abs() < 1e-3,
                "t={} reactive={} windowed naive mean={}",
                e.t,
                e.ptt,
                mean
            );
        }
    }

    #[test]
    fn empty_ecg_track_errors() {
        let ecg = SignalTrack::from_entries(Modality::Ecg, vec![]).unwrap();
        let ppg = ppg_track(&[(1050.0, 800.0)]);
        assert!(matches!(
            reactive_ptt(&ecg, &ppg, &ReactiveConfig::default()),
            Err(Error::EmptyTrack)
        ));
    }
}
