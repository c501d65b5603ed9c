//! LambdaMART: boosted regression trees fitted to LambdaRank gradients.

mod lambdas;
mod model_io;
mod tree;

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::metrics::ndcg_at_k;
use crate::features::{FeatureRow, FeatureVector, FEATURE_NAMES};
use crate::kg::{EntityId, LanguageCode};

pub use lambdas::{compute_lambdas, delta_ndcg, ranks_by_score};
pub use model_io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use tree::{best_split, fit_tree, leaf_value, Node, RegressionTree, SplitCandidate, TreeParams};

/// One query's candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query: EntityId,
    pub language: LanguageCode,
    /// Candidate event of each row.
    pub events: Vec<EntityId>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    feature_names: Vec<String>,
    groups: Vec<QueryGroup>,
}

impl TrainingSet {
    pub fn new(feature_names: Vec<String>, groups: Vec<QueryGroup>) -> Result<Self> {
        for g in &groups {
            if g.rows.len() != g.labels.len() || g.rows.len() != g.events.len() {
                return Err(Error::DimensionMismatch(g.rows.len(), g.labels.len()));
            }
            if g.rows.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "query `{}` ({}) has {} item(s); need at least 2",
                    g.query,
                    g.language,
                    g.rows.len()
                )));
            }
            if g.labels.iter().any(|l| !l.is_finite()) {
                return Err(Error::InsufficientData(format!(
                    "query `{}`: non-finite label",
                    g.query
                )));
            }
            if let Some(r) = g.rows.iter().find(|r| r.len() != feature_names.len()) {
                return Err(Error::DimensionMismatch(feature_names.len(), r.len()));
            }
        }
        Ok(TrainingSet {
            feature_names,
            groups,
        })
    }

    /// Groups feature rows by (language, query), keeping file order.
    pub fn from_feature_rows(rows: &[FeatureRow]) -> Result<Self> {
        let mut groups: Vec<QueryGroup> = Vec::new();
        let mut seen: BTreeSet<(LanguageCode, EntityId)> = BTreeSet::new();
        for r in rows {
            let same = groups
                .last()
                .is_some_and(|g| g.query == r.query && g.language == r.language);
            if !same {
                if !seen.insert((r.language.clone(), r.query.clone())) {
                    return Err(Error::InsufficientData(format!(
                        "rows of query `{}` ({}) are not contiguous",
                        r.query, r.language
                    )));
                }
                groups.push(QueryGroup {
                    query: r.query.clone(),
                    language: r.language.clone(),
                    events: Vec::new(),
                    rows: Vec::new(),
                    labels: Vec::new(),
                });
            }
            let g = groups.last_mut().expect("group pushed above");
            g.events.push(r.event.clone());
            g.rows.push(r.features.to_array().to_vec());
            g.labels.push(r.rel);
        }
        TrainingSet::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), groups)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Copy with the given column indexes removed.
    pub fn without_columns(&self, drop: &[usize]) -> TrainingSet {
        let keep: Vec<usize> = (0..self.feature_names.len())
            .filter(|c| !drop.contains(c))
            .collect();
        let groups = self
            .groups
            .iter()
            .map(|g| QueryGroup {
                rows: g
                    .rows
                    .iter()
                    .map(|r| keep.iter().map(|&c| r[c]).collect())
                    .collect(),
                ..g.clone()
            })
            .collect();
        TrainingSet {
            feature_names: keep.iter().map(|&c| self.feature_names[c].clone()).collect(),
            groups,
        }
    }

    /// Groups satisfying `pred`, in original order.
    pub fn filter(&self, pred: impl Fn(&QueryGroup) -> bool) -> TrainingSet {
        TrainingSet {
            feature_names: self.feature_names.clone(),
            groups: self.groups.iter().filter(|g| pred(g)).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMartConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_reg: f64,
    pub ndcg_truncation: usize,
    /// Recorded in the model; tree growth itself uses no randomness.
    pub seed: u64,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        LambdaMartConfig {
            n_trees: 100,
            learning_rate: 0.1,
            max_leaves: 16,
            min_samples_leaf: 1,
            l2_leaf_reg: 1.0,
            ndcg_truncation: 10,
            seed: 0,
        }
    }
}

impl LambdaMartConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("ltr: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_leaves < 1 || self.min_samples_leaf < 1 {
            return bad("max_leaves and min_samples_leaf must be >= 1");
        }
        if !(self.l2_leaf_reg > 0.0 && self.l2_leaf_reg.is_finite()) {
            return bad("l2_leaf_reg must be positive");
        }
        if self.ndcg_truncation < 1 {
            return bad("ndcg_truncation must be >= 1");
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_leaves: self.max_leaves,
            min_samples_leaf: self.min_samples_leaf,
            l2: self.l2_leaf_reg,
        }
    }
}

/// Boosted model: `base_score + learning_rate * Σ tree(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub config: LambdaMartConfig,
    pub feature_names: Vec<String>,
}

impl TreeEnsemble {
    pub fn empty(config: LambdaMartConfig, feature_names: Vec<String>) -> Self {
        TreeEnsemble {
            trees: Vec::new(),
            learning_rate: config.learning_rate,
            base_score: 0.0,
            config,
            feature_names,
        }
    }

    /// Score of a raw row laid out in `feature_names` order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Score of a full feature vector; the model must use the standard column order.
    pub fn predict(&self, fv: &FeatureVector) -> Result<f64> {
        if self.feature_names.len() != FEATURE_NAMES.len()
            || self.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(Error::FeatureOrderMismatch {
                expected: self.feature_names.join(","),
                actual: FEATURE_NAMES.join(","),
            });
        }
        let score = self.predict_row(&fv.to_array());
        if !score.is_finite() {
            return Err(Error::Internal("non-finite model score".into()));
        }
        Ok(score)
    }
}

/// Per-round diagnostics of [`train_verbose`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Mean training nDCG@K before the first tree and after every tree.
    pub ndcg: Vec<f64>,
    /// Largest |Σ λ| over groups, per round.
    pub max_lambda_sum: Vec<f64>,
}

/// Mean nDCG@k over groups of `labels` ranked by `scores`.
pub fn mean_ndcg(groups: &[(&[f64], &[f64])], k: usize) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::InsufficientData("nDCG over zero groups".into()));
    }
    let mut total = 0.0;
    for (labels, scores) in groups {
        total += ndcg_at_k(&labels_by_score(labels, scores), k)?;
    }
    Ok(total / groups.len() as f64)
}

/// Labels reordered by descending score, ties by original position.
pub fn labels_by_score(labels: &[f64], scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.into_iter().map(|i| labels[i]).collect()
}

pub fn train(ts: &TrainingSet, config: &LambdaMartConfig) -> Result<TreeEnsemble> {
    train_verbose(ts, config).map(|(m, _)| m)
}

pub fn train_verbose(ts: &TrainingSet, config: &LambdaMartConfig) -> Result<(TreeEnsemble, TrainTrace)> {
    config.validate()?;
    if ts.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let mut model = TreeEnsemble::empty(config.clone(), ts.feature_names.clone());
    let rows: Vec<Vec<f64>> = ts.groups.iter().flat_map(|g| g.rows.iter().cloned()).collect();
    let offsets: Vec<usize> = ts
        .groups
        .iter()
        .scan(0, |acc, g| {
            let start = *acc;
            *acc += g.rows.len();
            Some(start)
        })
        .collect();
    let mut scores = vec![model.base_score; rows.len()];
    let k = config.ndcg_truncation;
    let group_ndcg = |scores: &[f64]| -> Result<f64> {
        let pairs: Vec<(&[f64], &[f64])> = ts
            .groups
            .iter()
            .zip(&offsets)
            .map(|(g, &o)| (g.labels.as_slice(), &scores[o..o + g.rows.len()]))
            .collect();
        mean_ndcg(&pairs, k)
    };
    let mut trace = TrainTrace {
        ndcg: vec![group_ndcg(&scores)?],
        max_lambda_sum: Vec::new(),
    };
    let params = config.tree_params();
    for round in 0..config.n_trees {
        let per_group: Vec<(Vec<f64>, Vec<f64>)> = ts
            .groups
            .par_iter()
            .zip(&offsets)
            .map(|(g, &o)| compute_lambdas(&g.labels, &scores[o..o + g.rows.len()], k))
            .collect();
        let max_sum = per_group
            .iter()
            .map(|(l, _)| l.iter().sum::<f64>().abs())
            .fold(0.0, f64::max);
        let mut grads = Vec::with_capacity(rows.len());
        let mut hess = Vec::with_capacity(rows.len());
        for (l, h) in per_group {
            grads.extend(l.into_iter().map(|x| -x));
            hess.extend(h);
        }
        let tree = fit_tree(&rows, &grads, &hess, &params)?;
        for (s, r) in scores.iter_mut().zip(&rows) {
            *s += config.learning_rate * tree.predict(r);
        }
        model.trees.push(tree);
        trace.max_lambda_sum.push(max_sum);
        trace.ndcg.push(group_ndcg(&scores)?);
        log::debug!(
            "round {}: train nDCG@{k} = {:.6}",
            round + 1,
            trace.ndcg.last().copied().unwrap_or_default()
        );
    }
    Ok((model, trace))
}
