//! Random forest over sample feature vectors: bagged CART trees with the
//! Gini criterion, stratified k-fold cross-validation, and a uniform
//! random hyperparameter search selecting by mean F1.
//!
//! Everything is deterministic given the seeds: per-tree RNGs are
//! pre-drawn from a master stream so tree training can run in parallel
//! without affecting results.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, FoldMetrics, MetricSummary};
use crate::features::Sample;

const MODEL_FORMAT_VERSION: u32 = 1;

/// Forest shape and training seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Minimum node size eligible for splitting; smaller nodes become
    /// leaves.
    pub min_samples_split: usize,
    /// Features drawn (without replacement) per split; `None` means
    /// ⌊√n_features⌋.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_trees: 1600,
            max_depth: 20,
            min_samples_split: 10,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidConfig("forest.n_trees must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("forest.max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "forest.min_samples_split must be >= 2".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidConfig(
                "forest.features_per_split must be >= 1 when set".into(),
            ));
        }
        Ok(())
    }
}

/// One tree node; `left`/`right` index into the tree's node arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Training counts [class 0, class 1]; ties vote class 1.
        class_counts: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    /// Node 0 is the root.
    nodes: Vec<Node>,
}

impl Tree {
    fn vote(&self, x: &[f64]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { class_counts } => return class_counts[1] >= class_counts[0],
            }
        }
    }

    /// Edge count from the root to the deepest leaf.
    fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Row-major training matrix shared by the tree builders.
struct Matrix<'a> {
    x: &'a [f64],
    y: &'a [bool],
    n_features: usize,
}

impl Matrix<'_> {
    fn value(&self, row: u32, feature: usize) -> f64 {
        self.x[row as usize * self.n_features + feature]
    }

    fn label(&self, row: u32) -> bool {
        self.y[row as usize]
    }
}

fn gini(counts: [u32; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn class_counts(data: &Matrix, rows: &[u32]) -> [u32; 2] {
    let mut counts = [0u32; 2];
    for &r in rows {
        counts[data.label(r) as usize] += 1;
    }
    counts
}

/// Same-size resample with replacement.
fn bootstrap(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Finds the impurity-minimizing split over `features`, scanning midpoint
/// thresholds between consecutive distinct values. Features and thresholds
/// are visited in ascending order and only strictly better decreases are
/// accepted, so ties resolve deterministically. Returns `None` when no
/// split strictly lowers the weighted Gini impurity.
fn best_split(data: &Matrix, rows: &[u32], features: &[usize]) -> Option<BestSplit> {
    let parent_counts = class_counts(data, rows);
    let parent_gini = gini(parent_counts);
    let n = rows.len() as f64;
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(rows.len());
    for &f in features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (data.value(r, f), data.label(r))));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0u32; 2];
        for i in 0..sorted.len() - 1 {
            left[sorted[i].1 as usize] += 1;
            if sorted[i].0 == sorted[i + 1].0 {
                continue;
            }
            let right = [parent_counts[0] - left[0], parent_counts[1] - left[1]];
            let nl = (left[0] + left[1]) as f64;
            let nr = n - nl;
            let decrease = parent_gini - (nl / n) * gini(left) - (nr / n) * gini(right);
            if decrease > best.as_ref().map_or(0.0, |b| b.decrease) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: (sorted[i].0 + sorted[i + 1].0) / 2.0,
                    decrease,
                });
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    data: &'a Matrix<'a>,
    hp: &'a ForestHyperparams,
    features_per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Grows the subtree over `rows` and returns its arena index.
    fn grow(&mut self, rows: &[u32], depth: usize) -> usize {
        let counts = class_counts(self.data, rows);
        let splittable = counts[0] > 0
            && counts[1] > 0
            && depth < self.hp.max_depth
            && rows.len() >= self.hp.min_samples_split;
        if splittable {
            let mut features = rand::seq::index::sample(
                &mut self.rng,
                self.data.n_features,
                self.features_per_split,
            )
            .into_vec();
            features.sort_unstable();
            if let Some(split) = best_split(self.data, rows, &features) {
                // Accepted splits must strictly lower the impurity.
                assert!(split.decrease > 0.0, "split without impurity decrease");
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
                    .iter()
                    .partition(|&&r| self.data.value(r, split.feature) <= split.threshold);
                let at = self.nodes.len();
                self.nodes.push(Node::Leaf { class_counts: counts });
                let left = self.grow(&left_rows, depth + 1);
                let right = self.grow(&right_rows, depth + 1);
                self.nodes[at] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                return at;
            }
        }
        self.nodes.push(Node::Leaf { class_counts: counts });
        self.nodes.len() - 1
    }
}

fn grow_tree(
    data: &Matrix,
    hp: &ForestHyperparams,
    features_per_split: usize,
    seed: u64,
) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = bootstrap(data.y.len(), &mut rng);
    let mut builder = TreeBuilder {
        data,
        hp,
        features_per_split,
        rng,
        nodes: Vec::new(),
    };
    builder.grow(&rows, 0);
    Tree {
        nodes: builder.nodes,
    }
}

/// A fitted forest; serializable as versioned JSON that reproduces
/// predictions exactly on reload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    format_version: u32,
    pub hyperparams: ForestHyperparams,
    pub feature_count: usize,
    trees: Vec<Tree>,
}

/// Validates samples and returns (flattened row-major matrix, labels,
/// feature count).
fn design_matrix(samples: &[Sample]) -> Result<(Vec<f64>, Vec<bool>, usize)> {
    let Some(first) = samples.first() else {
        return Err(Error::DegenerateLabels);
    };
    let n_features = first.features.len();
    let mut x = Vec::with_capacity(samples.len() * n_features);
    let mut y = Vec::with_capacity(samples.len());
    for s in samples {
        if s.features.len() != n_features {
            return Err(Error::ShapeMismatch {
                expected: n_features,
                got: s.features.len(),
            });
        }
        x.extend_from_slice(&s.features);
        y.push(s.label);
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::DegenerateLabels);
    }
    Ok((x, y, n_features))
}

/// Trains a forest: each tree fits a bootstrap resample, considering a
/// fresh feature subset at every node.
pub fn fit(samples: &[Sample], hp: &ForestHyperparams) -> Result<TrainedForest> {
    hp.validate()?;
    let (x, y, n_features) = design_matrix(samples)?;
    let features_per_split = match hp.features_per_split {
        Some(k) if k > n_features => {
            return Err(Error::InvalidConfig(format!(
                "forest.features_per_split {k} exceeds the {n_features} available features"
            )));
        }
        Some(k) => k,
        None => ((n_features as f64).sqrt().floor() as usize).max(1),
    };
    let data = Matrix {
        x: &x,
        y: &y,
        n_features,
    };
    let mut master = ChaCha8Rng::seed_from_u64(hp.seed);
    let tree_seeds: Vec<u64> = (0..hp.n_trees).map(|_| master.gen()).collect();
    let trees: Vec<Tree> = tree_seeds
        .into_par_iter()
        .map(|seed| grow_tree(&data, hp, features_per_split, seed))
        .collect();
    Ok(TrainedForest {
        format_version: MODEL_FORMAT_VERSION,
        hyperparams: *hp,
        feature_count: n_features,
        trees,
    })
}

impl TrainedForest {
    /// Fraction of trees voting class 1.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_count {
            return Err(Error::ShapeMismatch {
                expected: self.feature_count,
                got: features.len(),
            });
        }
        let votes = self.trees.iter().filter(|t| t.vote(features)).count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    /// Class prediction; the 0.5 tie predicts class 1.
    pub fn predict(&self, features: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(features)? >= 0.5)
    }

    /// Deepest tree's depth, in edges.
    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a serialized model, rejecting unknown format versions.
    pub fn from_json(json: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::ModelFormat(format!(
                    "format_version {v}, this build reads {MODEL_FORMAT_VERSION}"
                )));
            }
            None => {
                return Err(Error::ModelFormat("missing format_version".into()));
            }
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Stratified fold assignment: each class is shuffled on its own seeded
/// stream and dealt round-robin, so fold class counts differ by at most
/// one and the first `n mod k` folds carry the extras.
fn stratified_folds(labels: &[bool], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation needs at least 2 folds, got {n_folds}"
        )));
    }
    let mut assign = vec![0usize; labels.len()];
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < n_folds {
            return Err(Error::TooFewPerClass {
                label: class as u8,
                count: members.len(),
                folds: n_folds,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assign[i] = j % n_folds;
        }
    }
    Ok(assign)
}

/// Cross-validation outcome: per-fold metrics, their mean ± sample std,
/// and the pooled out-of-fold scores aligned with the input samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldMetrics>,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub precision: MetricSummary,
    pub f1: MetricSummary,
    /// predict_proba of the fold model that held each sample out.
    pub oof_scores: Vec<f64>,
}

/// Stratified k-fold cross-validation; `seed` drives the fold assignment
/// while `hp.seed` drives per-fold training.
pub fn cross_validate(
    samples: &[Sample],
    hp: &ForestHyperparams,
    n_folds: usize,
    seed: u64,
) -> Result<CrossValidation> {
    hp.validate()?;
    let labels: Vec<bool> = samples.iter().map(|s| s.label).collect();
    let assign = stratified_folds(&labels, n_folds, seed)?;

    let mut fold_seed_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    fold_seed_rng.set_stream(0xF01D);
    let fold_seeds: Vec<u64> = (0..n_folds).map(|_| fold_seed_rng.gen()).collect();

    let mut folds = Vec::with_capacity(n_folds);
    let mut oof_scores = vec![0.0; samples.len()];
    for fold in 0..n_folds {
        let train: Vec<Sample> = samples
            .iter()
            .zip(&assign)
            .filter(|(_, &a)| a != fold)
            .map(|(s, _)| s.clone())
            .collect();
        let held_out: Vec<usize> = (0..samples.len()).filter(|&i| assign[i] == fold).collect();
        let fold_hp = ForestHyperparams {
            seed: fold_seeds[fold],
            ..*hp
        };
        let forest = fit(&train, &fold_hp)?;
        let mut fold_labels = Vec::with_capacity(held_out.len());
        let mut fold_preds = Vec::with_capacity(held_out.len());
        for &i in &held_out {
            let proba = forest.predict_proba(&samples[i].features)?;
            oof_scores[i] = proba;
            fold_labels.push(labels[i]);
            fold_preds.push(proba >= 0.5);
        }
        folds.push(FoldMetrics {
            fold,
            confusion: eval::confusion_metrics(&fold_labels, &fold_preds)?,
        });
    }

    let col = |f: fn(&eval::ConfusionMetrics) -> f64| {
        eval::summarize(&folds.iter().map(|m| f(&m.confusion)).collect::<Vec<_>>())
    };
    Ok(CrossValidation {
        sensitivity: col(|c| c.sensitivity),
        specificity: col(|c| c.specificity),
        precision: col(|c| c.precision),
        f1: col(|c| c.f1),
        folds,
        oof_scores,
    })
}

/// Inclusive integer range for the hyperparameter search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    fn check(&self, name: &'static str) -> Result<()> {
        if self.min > self.max {
            return Err(Error::EmptyRange(name));
        }
        Ok(())
    }
}

/// Search space for [`random_search`], sampled uniformly per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchRanges {
    pub n_trees: IntRange,
    pub max_depth: IntRange,
    pub min_samples_split: IntRange,
    pub n_draws: usize,
}

impl Default for SearchRanges {
    fn default() -> Self {
        Self {
            n_trees: IntRange { min: 100, max: 2000 },
            max_depth: IntRange { min: 2, max: 30 },
            min_samples_split: IntRange { min: 2, max: 20 },
            n_draws: 20,
        }
    }
}

impl SearchRanges {
    pub fn validate(&self) -> Result<()> {
        self.n_trees.check("n_trees")?;
        self.max_depth.check("max_depth")?;
        self.min_samples_split.check("min_samples_split")?;
        if self.n_draws < 1 {
            return Err(Error::InvalidConfig(
                "search.n_draws must be >= 1".into(),
            ));
        }
        if self.n_trees.min < 1 {
            return Err(Error::InvalidConfig("search n_trees must be >= 1".into()));
        }
        if self.max_depth.min < 1 {
            return Err(Error::InvalidConfig("search max_depth must be >= 1".into()));
        }
        if self.min_samples_split.min < 2 {
            return Err(Error::InvalidConfig(
                "search min_samples_split must be >= 2".into(),
            ));
        }
        Ok(())
    }

    /// One uniform draw per dimension, in declaration order.
    fn draw(&self, rng: &mut ChaCha8Rng, seed: u64) -> ForestHyperparams {
        ForestHyperparams {
            n_trees: rng.gen_range(self.n_trees.min..=self.n_trees.max),
            max_depth: rng.gen_range(self.max_depth.min..=self.max_depth.max),
            min_samples_split: rng.gen_range(self.min_samples_split.min..=self.min_samples_split.max),
            features_per_split: None,
            seed,
        }
    }
}

/// One evaluated draw of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDraw {
    pub hyperparams: ForestHyperparams,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: ForestHyperparams,
    pub best_mean_f1: f64,
    pub draws: Vec<SearchDraw>,
}

/// Draws `ranges.n_draws` configurations uniformly (with replacement),
/// scores each by cross-validated mean F1 on the same fold assignment,
/// and returns the argmax; ties keep the earlier draw.
pub fn random_search(
    samples: &[Sample],
    ranges: &SearchRanges,
    n_folds: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5EA7C4);
    let mut draws = Vec::with_capacity(ranges.n_draws);
    let mut best: Option<usize> = None;
    for d in 0..ranges.n_draws {
        let hp = ranges.draw(&mut rng, seed);
        let cv = cross_validate(samples, &hp, n_folds, seed)?;
        log::info!(
            "search draw {d}: n_trees={} max_depth={} min_samples_split={} mean_f1={:.4}",
            hp.n_trees,
            hp.max_depth,
            hp.min_samples_split,
            cv.f1.mean
        );
        draws.push(SearchDraw {
            hyperparams: hp,
            mean_f1: cv.f1.mean,
        });
        if best.map_or(true, |b| cv.f1.mean > draws[b].mean_f1) {
            best = Some(d);
        }
    }
    let best = best.expect("n_draws >= 1");
    Ok(SearchOutcome {
        best: draws[best].hyperparams,
        best_mean_f1: draws[best].mean_f1,
        draws,
    })
}
