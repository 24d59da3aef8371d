//! End-to-end orchestration: per-case preprocessing and PTT estimation,
//! dataset assembly, cross-validated training (optionally behind a
//! hyperparameter search), and the final report.
//!
//! Cases are processed in parallel and re-sorted by id, so results do not
//! depend on scheduling. One seed drives fold assignment, search draws,
//! and forest training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    self, CrossValidation, ForestHyperparams, SearchOutcome, SearchRanges, TrainedForest,
};
use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::features::{self, FeatureConfig, Sample};
use crate::preprocess::{self, PreprocessConfig};
use crate::ptt::{self, OffsetTrace, ReactiveConfig};
use crate::signal::{Case, PttSeries};

/// Which PTT estimator feeds the feature stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Naive,
    Reactive,
}

/// Full parameter set of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineParams {
    pub algorithm: Algorithm,
    pub preprocess: PreprocessConfig,
    pub reactive: ReactiveConfig,
    pub features: FeatureConfig,
    pub forest: ForestHyperparams,
    /// When set, a random search picks the hyperparameters and
    /// `forest` only contributes its non-searched fields.
    pub search: Option<SearchRanges>,
    pub n_folds: usize,
    /// Drives fold assignment, search draws, and forest training.
    pub seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Reactive,
            preprocess: PreprocessConfig::default(),
            reactive: ReactiveConfig::default(),
            features: FeatureConfig::default(),
            forest: ForestHyperparams::default(),
            search: None,
            n_folds: 5,
            seed: 0,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.reactive.validate()?;
        self.features.validate()?;
        self.forest.validate()?;
        if let Some(search) = &self.search {
            search.validate()?;
        }
        if self.n_folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_folds must be >= 2, got {}",
                self.n_folds
            )));
        }
        Ok(())
    }
}

/// A case dropped during preprocessing, with the reason logged into the
/// report; distinct from hard errors, which abort the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseExclusion {
    pub case_id: String,
    pub reason: String,
}

/// Preprocessing result for one case.
pub enum Prepared {
    Ready(PreparedCase),
    Excluded(CaseExclusion),
}

/// A case that survived preprocessing. `had_seizures` records the
/// original annotation state: a seizure case whose annotations fell
/// outside the clipped overlap produces no samples at all rather than
/// turning into a negative-sample source.
pub struct PreparedCase {
    pub case: Case,
    pub had_seizures: bool,
}

fn excluded(case: &Case, reason: impl Into<String>) -> Prepared {
    let exclusion = CaseExclusion {
        case_id: case.id().to_string(),
        reason: reason.into(),
    };
    log::warn!("case {}: excluded: {}", exclusion.case_id, exclusion.reason);
    Prepared::Excluded(exclusion)
}

/// Outlier removal, clipping to the overlap window, and the mean-RR
/// divergence rule. Degenerate inputs (too short, disjoint) become
/// exclusions.
pub fn prepare_case(case: &Case, cfg: &PreprocessConfig) -> Result<Prepared> {
    cfg.validate()?;
    let ecg = match preprocess::remove_outliers(case.ecg(), cfg.sigma_factor) {
        Ok(t) => t,
        Err(Error::TooShort { .. }) => return Ok(excluded(case, "ECG track shorter than 2 entries")),
        Err(e) => return Err(e),
    };
    let ppg = match preprocess::remove_outliers(case.ppg(), cfg.sigma_factor) {
        Ok(t) => t,
        Err(Error::TooShort { .. }) => return Ok(excluded(case, "PPG track shorter than 2 entries")),
        Err(e) => return Err(e),
    };
    let (ecg, ppg) = match preprocess::clip_to_overlap(&ecg, &ppg) {
        Ok(pair) => pair,
        Err(Error::NoOverlap) => return Ok(excluded(case, "tracks do not overlap")),
        Err(e) => return Err(e),
    };
    if ecg.len() < 2 || ppg.len() < 2 {
        return Ok(excluded(case, "fewer than 2 entries inside the overlap"));
    }
    if preprocess::exclude_case(&ecg, &ppg, cfg.k_ms)? {
        return Ok(excluded(
            case,
            format!(
                "track mean RR intervals diverge by more than {} ms",
                cfg.k_ms
            ),
        ));
    }
    // Annotations outside the clipped span cannot be sampled; drop them
    // but remember the case was a seizure case.
    let span_lo = ecg.start().min(ppg.start());
    let span_hi = ecg.end().max(ppg.end());
    let had_seizures = case.has_seizure();
    let seizures = case
        .seizures()
        .iter()
        .filter(|s| s.start_ms >= span_lo && s.end_ms <= span_hi)
        .copied()
        .collect();
    let case = Case::new(case.id(), ecg, ppg, seizures)?;
    Ok(Prepared::Ready(PreparedCase { case, had_seizures }))
}

/// Everything one case contributes to a run.
pub struct CaseOutcome {
    pub case_id: String,
    pub series: PttSeries,
    /// Cumulative-offset trace; present for the reactive estimator only.
    pub offset_trace: Option<OffsetTrace>,
    pub samples: Vec<Sample>,
}

fn case_outcome(prepared: &PreparedCase, params: &PipelineParams) -> Result<CaseOutcome> {
    let case = &prepared.case;
    let (series, offset_trace) = match params.algorithm {
        Algorithm::Naive => (ptt::naive_ptt(case.ecg(), case.ppg())?, None),
        Algorithm::Reactive => {
            let (series, trace) = ptt::reactive_ptt(case.ecg(), case.ppg(), &params.reactive)?;
            (series, Some(trace))
        }
    };
    let samples = if prepared.had_seizures {
        match case.first_seizure() {
            Some(seizure) => {
                features::make_positive_sample(&series, seizure, &params.features, case.id())?
                    .into_iter()
                    .collect()
            }
            None => Vec::new(),
        }
    } else {
        features::make_negative_samples(&series, &params.features, case.id())?
    };
    log::info!(
        "case {}: {} PTT points, {} samples",
        case.id(),
        series.len(),
        samples.len()
    );
    Ok(CaseOutcome {
        case_id: case.id().to_string(),
        series,
        offset_trace,
        samples,
    })
}

/// Runs preprocessing and PTT/sample extraction for every case in
/// parallel; outcomes and exclusions come back sorted by case id.
pub fn process_cases(
    cases: &[Case],
    params: &PipelineParams,
) -> Result<(Vec<CaseOutcome>, Vec<CaseExclusion>)> {
    params.validate()?;
    let results: Vec<Result<Prepared>> = cases
        .par_iter()
        .map(|case| prepare_case(case, &params.preprocess))
        .collect();

    let mut ready = Vec::new();
    let mut exclusions = Vec::new();
    for result in results {
        match result? {
            Prepared::Ready(p) => ready.push(p),
            Prepared::Excluded(e) => exclusions.push(e),
        }
    }
    let mut outcomes: Vec<CaseOutcome> = ready
        .par_iter()
        .map(|p| case_outcome(p, params))
        .collect::<Result<_>>()?;
    outcomes.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    exclusions.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok((outcomes, exclusions))
}

/// Result of a full run.
pub struct PipelineRun {
    pub outcomes: Vec<CaseOutcome>,
    pub exclusions: Vec<CaseExclusion>,
    /// Hyperparameters actually trained with (search winner when a search
    /// ran).
    pub hyperparams: ForestHyperparams,
    pub search: Option<SearchOutcome>,
    pub cv: CrossValidation,
    pub report: EvaluationReport,
    /// Forest retrained on the full dataset with the chosen
    /// hyperparameters.
    pub model: TrainedForest,
}

impl PipelineRun {
    /// The assembled dataset in case-id order.
    pub fn samples(&self) -> Vec<Sample> {
        self.outcomes
            .iter()
            .flat_map(|o| o.samples.iter().cloned())
            .collect()
    }
}

/// Executes the full pipeline over in-memory cases.
pub fn run_pipeline(cases: &[Case], params: &PipelineParams) -> Result<PipelineRun> {
    let (outcomes, exclusions) = process_cases(cases, params)?;
    if outcomes.is_empty() {
        return Err(Error::EmptyCorpusAfterExclusion);
    }
    let samples: Vec<Sample> = outcomes
        .iter()
        .flat_map(|o| o.samples.iter().cloned())
        .collect();
    log::info!(
        "dataset: {} samples ({} cases kept, {} excluded)",
        samples.len(),
        outcomes.len(),
        exclusions.len()
    );

    let (hyperparams, search) = match &params.search {
        Some(ranges) => {
            let outcome = classifier::random_search(&samples, ranges, params.n_folds, params.seed)?;
            log::info!(
                "search winner: n_trees={} max_depth={} min_samples_split={} (mean F1 {:.4})",
                outcome.best.n_trees,
                outcome.best.max_depth,
                outcome.best.min_samples_split,
                outcome.best_mean_f1
            );
            (outcome.best, Some(outcome))
        }
        None => (
            ForestHyperparams {
                seed: params.seed,
                ..params.forest
            },
            None,
        ),
    };

    let cv = classifier::cross_validate(&samples, &hyperparams, params.n_folds, params.seed)?;
    let report = EvaluationReport::from_folds(
        &samples,
        cv.folds.clone(),
        &cv.oof_scores,
        0.5,
        params.features.sample_len_s,
        params.features.o_s_s,
        cases.len(),
        exclusions.len(),
    )?;
    let model = classifier::fit(&samples, &hyperparams)?;
    Ok(PipelineRun {
        outcomes,
        exclusions,
        hyperparams,
        search,
        cv,
        report,
        model,
    })
}
