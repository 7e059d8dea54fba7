//! Tree ensembles and the two loss functions used by the CI test.
//!
//! `General` is a bootstrap random forest with best splits; `Fast` is
//! extra-trees (no bootstrap, random thresholds). Both can be told to keep a
//! designated candidate column in every split's feature subset.

mod tree;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, Matrix};
use crate::error::{Error, Result};
use crate::rng::derived_rng;
use tree::{SplitRule, Target, Tree, TreeParams};

/// Probability clip applied before log-loss.
pub const PROB_EPSILON: f64 = 1e-7;

/// Row cap per CI test; applied by the CI test, not by `fit`.
pub const MAX_SUBSAMPLE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    General,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Fixed(usize),
    SqrtP,
}

impl MaxFeatures {
    /// Bagging rule keyed on the number of model inputs.
    pub fn for_feature_count(p: usize) -> Self {
        if p < 12 {
            MaxFeatures::All
        } else if p <= 80 {
            MaxFeatures::Fixed(12)
        } else {
            MaxFeatures::SqrtP
        }
    }

    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::Fixed(k) => k.min(p),
            MaxFeatures::SqrtP => ((p as f64).sqrt().floor() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub variant: Variant,
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    /// `None` applies [`MaxFeatures::for_feature_count`].
    pub max_features: Option<MaxFeatures>,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            variant: Variant::General,
            n_trees: 100,
            min_samples_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if let Some(MaxFeatures::Fixed(0)) = self.max_features {
            return Err(Error::Config("max_features must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_features_for(&self, p: usize) -> MaxFeatures {
        self.max_features.unwrap_or_else(|| MaxFeatures::for_feature_count(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    trees: Vec<Tree>,
    task: Task,
    feature_count: usize,
    classes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Regression(Vec<f64>),
    /// `probs` is row-major, `classes.len()` entries per row.
    Classification { classes: Vec<f64>, probs: Vec<f64> },
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Regression(v) => v.len(),
            Prediction::Classification { classes, probs } => {
                if classes.is_empty() {
                    0
                } else {
                    probs.len() / classes.len()
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn sorted_classes(target: &[f64]) -> Vec<f64> {
    let mut c = target.to_vec();
    c.sort_by(|a, b| a.total_cmp(b));
    c.dedup();
    c
}

fn class_index(classes: &[f64], v: f64) -> Option<usize> {
    classes.binary_search_by(|c| c.total_cmp(&v)).ok()
}

/// Fits an ensemble on `features` (n x d) against `target`.
///
/// Discrete targets are treated as classification over their distinct
/// training values. `candidate`, when set, is a feature index forced into
/// every split's candidate subset.
pub fn fit(
    features: &Matrix,
    target: &[f64],
    kind: ColumnKind,
    config: &LearnerConfig,
    candidate: Option<usize>,
) -> Result<FittedModel> {
    config.validate()?;
    let n = features.rows();
    let d = features.cols();
    if n == 0 {
        return Err(Error::Fit("empty training set".into()));
    }
    if d == 0 {
        return Err(Error::Fit("no features".into()));
    }
    if target.len() != n {
        return Err(Error::Contract(format!("target length {} != rows {n}", target.len())));
    }
    if let Some(c) = candidate {
        if c >= d {
            return Err(Error::Contract(format!("candidate column {c} out of range")));
        }
    }
    let columns: Vec<&[f64]> = (0..d).map(|j| features.column(j)).collect();
    let params = TreeParams {
        rule: match config.variant {
            Variant::General => SplitRule::Best,
            Variant::Fast => SplitRule::RandomThreshold,
        },
        min_samples_leaf: config.min_samples_leaf,
        max_features: config.max_features_for(d).resolve(d),
        candidate,
    };
    let (task, classes, labels) = match kind {
        ColumnKind::Continuous => (Task::Regression, Vec::new(), Vec::new()),
        ColumnKind::Discrete => {
            let classes = sorted_classes(target);
            let labels: Vec<u32> = target
                .iter()
                .map(|&v| class_index(&classes, v).expect("class present") as u32)
                .collect();
            (Task::Classification, classes, labels)
        }
    };
    let tgt = match task {
        Task::Regression => Target::Regression(target),
        Task::Classification => Target::Classification {
            labels: &labels,
            n_classes: classes.len(),
        },
    };
    let bootstrap = config.variant == Variant::General;
    let presorted = (params.rule == SplitRule::Best).then(|| tree::presort(&columns));
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_rng(config.seed, &[t as u64]);
            let rows: Vec<u32> = if bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            tree::grow(&columns, tgt, rows, presorted.as_deref(), &params, &mut rng)
        })
        .collect();
    Ok(FittedModel {
        trees,
        task,
        feature_count: d,
        classes,
    })
}

impl FittedModel {
    pub fn task(&self) -> Task {
        self.task
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    pub fn mean_leaves(&self) -> f64 {
        self.trees.iter().map(|t| t.n_leaves() as f64).sum::<f64>() / self.trees.len() as f64
    }

    /// Forest-averaged predictions. Classification rows are unclipped
    /// averages of leaf frequencies and sum to one.
    pub fn predict(&self, features: &Matrix) -> Result<Prediction> {
        if features.cols() != self.feature_count {
            return Err(Error::Contract(format!(
                "model expects {} features, got {}",
                self.feature_count,
                features.cols()
            )));
        }
        let n = features.rows();
        let columns: Vec<&[f64]> = (0..self.feature_count).map(|j| features.column(j)).collect();
        let inv = 1.0 / self.trees.len() as f64;
        match self.task {
            Task::Regression => {
                let out = (0..n)
                    .map(|i| self.trees.iter().map(|t| t.leaf(&columns, i)[0]).sum::<f64>() * inv)
                    .collect();
                Ok(Prediction::Regression(out))
            }
            Task::Classification => {
                let c = self.classes.len();
                let mut probs = vec![0.0; n * c];
                for (i, row) in probs.chunks_mut(c).enumerate() {
                    for t in &self.trees {
                        for (acc, v) in row.iter_mut().zip(t.leaf(&columns, i)) {
                            *acc += v;
                        }
                    }
                    row.iter_mut().for_each(|v| *v *= inv);
                }
                Ok(Prediction::Classification {
                    classes: self.classes.clone(),
                    probs,
                })
            }
        }
    }
}

/// Per-observation loss: squared error for continuous targets, clipped
/// multiclass log-loss for discrete ones. A truth value absent from the
/// predicted classes gets probability zero before clipping.
pub fn loss(kind: ColumnKind, truth: &[f64], prediction: &Prediction) -> Result<Vec<f64>> {
    if truth.len() != prediction.len() {
        return Err(Error::Contract(format!(
            "loss length mismatch: {} truths, {} predictions",
            truth.len(),
            prediction.len()
        )));
    }
    match (kind, prediction) {
        (ColumnKind::Continuous, Prediction::Regression(pred)) => {
            Ok(truth.iter().zip(pred).map(|(t, p)| (t - p) * (t - p)).collect())
        }
        (ColumnKind::Discrete, Prediction::Classification { classes, probs }) => {
            let c = classes.len();
            truth
                .iter()
                .zip(probs.chunks(c))
                .map(|(&t, row)| {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > 1e-6 {
                        return Err(Error::Contract(format!("probability row sums to {s}")));
                    }
                    let p = class_index(classes, t).map_or(0.0, |k| row[k]);
                    Ok(-p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON).ln())
                })
                .collect()
        }
        _ => Err(Error::Contract("prediction type does not match column kind".into())),
    }
}
