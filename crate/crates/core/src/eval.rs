//! Detection metrics: confusion-matrix ratios, ROC/AUC, alarm-rate and
//! latency figures, and the aggregate report emitted by a pipeline run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Sample;
use crate::signal::SeizureType;

/// Binary confusion counts plus the derived ratios.
///
/// Undefined ratios (empty denominator) are reported as 0.0: a classifier
/// that never fires earns zero precision, and F1 is zero whenever
/// precision and sensitivity both are.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes confusion counts and ratios from aligned label/prediction
/// slices.
pub fn confusion_metrics(labels: &[bool], predictions: &[bool]) -> Result<ConfusionMetrics> {
    if labels.len() != predictions.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&label, &pred) in labels.iter().zip(predictions) {
        match (label, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let sensitivity = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    let precision = ratio(tp, tp + fp);
    let f1 = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        0.0
    };
    Ok(ConfusionMetrics {
        tp,
        fp,
        tn,
        fn_,
        sensitivity,
        specificity,
        precision,
        f1,
    })
}

/// One operating point: everything with score `>= threshold` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps the distinct scores in descending order, prepending a finite
/// sentinel threshold of `max score + 1.0` so the curve starts at (0, 0);
/// the lowest score classifies everything positive, ending it at (1, 1).
/// AUC is the trapezoid area, which equals the Mann-Whitney pair statistic
/// with half credit for score ties.
pub fn roc_curve(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig(
            "classifier scores must be finite".into(),
        ));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut thresholds = scores.to_vec();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let sentinel = thresholds.last().unwrap() + 1.0;

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    for &th in std::iter::once(&sentinel).chain(thresholds.iter().rev()) {
        let (mut tp, mut fp) = (0usize, 0usize);
        for (&label, &score) in labels.iter().zip(scores) {
            if score >= th {
                if label {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: th,
        });
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Seizure-free observation time represented by `n_negative` samples.
pub fn negative_hours(n_negative: usize, sample_len_s: f64) -> f64 {
    n_negative as f64 * sample_len_s / 3600.0
}

/// False alarms per day of seizure-free observation.
pub fn false_alarm_rate(false_positives: usize, negative_hours: f64) -> Result<f64> {
    if !(negative_hours > 0.0) || !negative_hours.is_finite() {
        return Err(Error::InvalidDuration(negative_hours));
    }
    Ok(false_positives as f64 / (negative_hours / 24.0))
}

/// Worst-case alarm delay after seizure onset, in seconds.
///
/// A sample centered `o_s_s` past the seizure middle is only complete —
/// and thus classifiable — once its trailing half has been observed, i.e.
/// `sample_len_s / 2 - o_s_s` after the centering instant.
pub fn detection_latency_s(sample_len_s: f64, o_s_s: f64) -> Result<f64> {
    let latency = sample_len_s / 2.0 - o_s_s;
    if latency < 0.0 {
        return Err(Error::InvalidLatencyConfig { sample_len_s, o_s_s });
    }
    Ok(latency)
}

/// Detection tally for one seizure type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub detected: usize,
    pub total: usize,
    pub rate: f64,
}

impl TypeBreakdown {
    pub fn new(detected: usize, total: usize) -> Self {
        Self {
            detected,
            total,
            rate: ratio(detected, total),
        }
    }
}

/// Tallies detections per seizure type over the positive samples;
/// `predictions` is aligned with `samples`.
pub fn per_type_breakdown(
    samples: &[Sample],
    predictions: &[bool],
) -> Result<BTreeMap<SeizureType, TypeBreakdown>> {
    if samples.len() != predictions.len() {
        return Err(Error::ShapeMismatch {
            expected: samples.len(),
            got: predictions.len(),
        });
    }
    let mut counts: BTreeMap<SeizureType, (usize, usize)> = BTreeMap::new();
    for (sample, &pred) in samples.iter().zip(predictions) {
        let Some(ty) = sample.seizure_type else {
            continue;
        };
        if !sample.label {
            continue;
        }
        let entry = counts.entry(ty).or_insert((0, 0));
        entry.1 += 1;
        if pred {
            entry.0 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(ty, (detected, total))| (ty, TypeBreakdown::new(detected, total)))
        .collect())
}

/// Mean and sample standard deviation (n-1 denominator; 0 when n < 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    if values.is_empty() {
        return MetricSummary { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MetricSummary { mean, std }
}

/// Metrics of one cross-validation fold's held-out partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    #[serde(flatten)]
    pub confusion: ConfusionMetrics,
}

/// Aggregate result of a full pipeline run, serialized as the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_samples: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_cases: usize,
    pub n_cases_excluded: usize,
    pub folds: Vec<FoldMetrics>,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub precision: MetricSummary,
    pub f1: MetricSummary,
    /// Pooled out-of-fold confusion over all samples.
    pub pooled: ConfusionMetrics,
    /// ROC of the pooled out-of-fold scores.
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub false_alarm_rate_per_day: f64,
    pub detection_latency_s: f64,
    pub negative_hours: f64,
    pub per_type: BTreeMap<SeizureType, TypeBreakdown>,
}

impl EvaluationReport {
    /// Builds the report from per-fold metrics and pooled out-of-fold
    /// predictions/scores aligned with `samples`.
    pub fn from_folds(
        samples: &[Sample],
        folds: Vec<FoldMetrics>,
        oof_scores: &[f64],
        decision_threshold: f64,
        sample_len_s: f64,
        o_s_s: f64,
        n_cases: usize,
        n_cases_excluded: usize,
    ) -> Result<Self> {
        let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
        let predictions: Vec<bool> = oof_scores.iter().map(|&p| p >= decision_threshold).collect();
        let pooled = confusion_metrics(&labels, &predictions)?;
        let roc = roc_curve(&labels, oof_scores)?;
        let n_positive = labels.iter().filter(|&&l| l).count();
        let n_negative = labels.len() - n_positive;
        let hours = negative_hours(n_negative, sample_len_s);
        let far = false_alarm_rate(pooled.fp, hours)?;
        let latency = detection_latency_s(sample_len_s, o_s_s)?;
        let per_type = per_type_breakdown(samples, &predictions)?;
        let col = |f: fn(&ConfusionMetrics) -> f64| {
            summarize(&folds.iter().map(|m| f(&m.confusion)).collect::<Vec<_>>())
        };
        Ok(EvaluationReport {
            n_samples: samples.len(),
            n_positive,
            n_negative,
            n_cases,
            n_cases_excluded,
            sensitivity: col(|c| c.sensitivity),
            specificity: col(|c| c.specificity),
            precision: col(|c| c.precision),
            f1: col(|c| c.f1),
            folds,
            pooled,
            roc: roc.points,
            auc: roc.auc,
            false_alarm_rate_per_day: far,
            detection_latency_s: latency,
            negative_hours: hours,
            per_type,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_ratios() {
        let labels = [true, true, true, false, false, false, false, false];
        let preds = [true, true, false, true, false, false, false, false];
        let m = confusion_metrics(&labels, &preds).unwrap();
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 4, 1));
        assert!((m.sensitivity - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.specificity - 4.0 / 5.0).abs() < 1e-12);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn silent_classifier_edge_rules() {
        let labels = [true, true, false];
        let preds = [false, false, false];
        let m = confusion_metrics(&labels, &preds).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.sensitivity, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.specificity, 1.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(matches!(
            confusion_metrics(&[true], &[true, false]),
            Err(Error::ShapeMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn four_sample_auc() {
        // Pos scores {0.9, 0.4}, neg {0.6, 0.1}: three of four pos/neg
        // pairs rank correctly.
        let labels = [true, true, false, false];
        let scores = [0.9, 0.4, 0.6, 0.1];
        let roc = roc_curve(&labels, &scores).unwrap();
        assert!((roc.auc - 0.75).abs() < 1e-12);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!((first.threshold - 1.9).abs() < 1e-12);
        assert!(first.threshold.is_finite());
        // 4 distinct scores + sentinel.
        assert_eq!(roc.points.len(), 5);
    }

    /// Pair-counting Mann-Whitney statistic: ties earn half credit.
    fn mann_whitney(labels: &[bool], scores: &[f64]) -> f64 {
        let mut pairs = 0.0;
        let mut correct = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    correct += 1.0;
                } else if scores[i] == scores[j] {
                    correct += 0.5;
                }
            }
        }
        correct / pairs
    }

    #[test]
    fn auc_matches_pair_statistic_with_ties() {
        let labels = [true, true, true, false, false, false, true, false];
        let scores = [0.8, 0.5, 0.5, 0.5, 0.2, 0.8, 0.3, 0.3];
        let roc = roc_curve(&labels, &scores).unwrap();
        assert!((roc.auc - mann_whitney(&labels, &scores)).abs() < 1e-12);
    }

    #[test]
    fn roc_monotone_and_degenerate_labels() {
        let labels = [true, false, true, false, true];
        let scores = [0.9, 0.8, 0.7, 0.3, 0.1];
        let roc = roc_curve(&labels, &scores).unwrap();
        for w in roc.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr);
            assert!(w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold < w[0].threshold);
        }
        assert!(matches!(
            roc_curve(&[true, true], &[0.5, 0.6]),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn alarm_rate_per_day() {
        // 2000 negatives of 480 s are 266.67 h; six false alarms over that
        // span are 0.54 per day.
        let hours = negative_hours(2000, 480.0);
        assert!((hours - 800.0 / 3.0).abs() < 1e-9);
        let far = false_alarm_rate(6, hours).unwrap();
        assert!((far - 0.54).abs() < 0.005);
        assert!(matches!(
            false_alarm_rate(1, 0.0),
            Err(Error::InvalidDuration(_))
        ));
    }

    #[test]
    fn latency_from_sample_geometry() {
        assert_eq!(detection_latency_s(480.0, 30.0).unwrap(), 210.0);
        assert!(matches!(
            detection_latency_s(40.0, 30.0),
            Err(Error::InvalidLatencyConfig { .. })
        ));
    }

    fn sample(label: bool, ty: Option<SeizureType>) -> Sample {
        Sample {
            features: vec![0.0],
            label,
            case_id: "c".into(),
            t_center_ms: 0.0,
            seizure_type: ty,
        }
    }

    #[test]
    fn breakdown_counts_positives_by_type() {
        // 3 cps (2 detected), 2 gtcs (2 detected), plus negatives that
        // must not contribute.
        let samples = vec![
            sample(true, Some(SeizureType::Cps)),
            sample(true, Some(SeizureType::Cps)),
            sample(true, Some(SeizureType::Cps)),
            sample(true, Some(SeizureType::Gtcs)),
            sample(true, Some(SeizureType::Gtcs)),
            sample(false, None),
            sample(false, None),
        ];
        let preds = [true, true, false, true, true, true, false];
        let map = per_type_breakdown(&samples, &preds).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map[&SeizureType::Cps], TypeBreakdown::new(2, 3));
        assert_eq!(map[&SeizureType::Gtcs], TypeBreakdown::new(2, 2));
        assert!((TypeBreakdown::new(25, 67).rate * 100.0 - 37.31).abs() < 0.005);
        assert_eq!(TypeBreakdown::new(10, 10).rate, 1.0);
        assert!(per_type_breakdown(&[], &[]).unwrap().is_empty());
    }

    #[test]
    fn summary_mean_and_sample_std() {
        let s = summarize(&[0.5, 0.6, 0.7]);
        assert!((s.mean - 0.6).abs() < 1e-12);
        assert!((s.std - 0.1).abs() < 1e-12);
        let one = summarize(&[0.4]);
        assert_eq!((one.mean, one.std), (0.4, 0.0));
    }

    #[test]
    fn report_assembly() {
        let samples = vec![
            sample(true, Some(SeizureType::Cps)),
            sample(true, Some(SeizureType::Gtcs)),
            sample(false, None),
            sample(false, None),
            sample(false, None),
        ];
        let folds = vec![
            FoldMetrics {
                fold: 0,
                confusion: confusion_metrics(&[true, false], &[true, false]).unwrap(),
            },
            FoldMetrics {
                fold: 1,
                confusion: confusion_metrics(&[true, false, false], &[false, false, false])
                    .unwrap(),
            },
        ];
        let oof = [0.9, 0.3, 0.6, 0.2, 0.1];
        let report =
            EvaluationReport::from_folds(&samples, folds, &oof, 0.5, 480.0, 30.0, 5, 1).unwrap();
        assert_eq!(report.n_samples, 5);
        assert_eq!(report.n_positive, 2);
        assert_eq!(report.n_negative, 3);
        assert_eq!(report.pooled.tp, 1);
        assert_eq!(report.pooled.fp, 1);
        assert_eq!(report.detection_latency_s, 210.0);
        assert!((report.negative_hours - 0.4).abs() < 1e-12);
        assert_eq!(report.per_type.len(), 2);
        assert!((report.sensitivity.mean - 0.5).abs() < 1e-12);
        // Report survives a JSON round trip.
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
