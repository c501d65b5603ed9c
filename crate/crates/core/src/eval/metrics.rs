use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kg::EntityId;

/// Discount of a 1-based rank: 1 / log2(rank + 1).
pub fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// DCG of the first `k` labels, linear gain.
pub fn dcg_at_k(labels: &[f64], k: usize) -> f64 {
    labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g * discount(i + 1))
        .sum()
}

/// DCG of the ideal (descending) ordering of `labels`.
pub fn ideal_dcg_at_k(labels: &[f64], k: usize) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    dcg_at_k(&sorted, k)
}

/// nDCG@k of labels listed in predicted order; 0 when every label is 0.
pub fn ndcg_at_k(labels: &[f64], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("nDCG of an empty list".into()));
    }
    let ideal = ideal_dcg_at_k(labels, k);
    if ideal <= 0.0 {
        return Ok(0.0);
    }
    Ok(dcg_at_k(labels, k) / ideal)
}

/// AP@k: precision at each relevant rank within the top `k`, divided by the
/// number of relevant items in the top `k` (0 if there are none).
pub fn average_precision_at_k(relevant: &[bool], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, _) in relevant.iter().take(k).enumerate().filter(|(_, r)| **r) {
        hits += 1;
        sum += hits as f64 / (i + 1) as f64;
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}

/// Mean of [`average_precision_at_k`] over queries.
pub fn map_at_k(lists: &[Vec<bool>], k: usize) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::InsufficientData("MAP over zero queries".into()));
    }
    let total: f64 = lists
        .iter()
        .map(|l| average_precision_at_k(l, k))
        .sum::<Result<f64>>()?;
    Ok(total / lists.len() as f64)
}

/// Binarizes graded labels: anything above 0 is relevant.
pub fn binarize(labels: &[f64]) -> Vec<bool> {
    labels.iter().map(|&l| l > 0.0).collect()
}

/// Fraction of ground-truth events present among the candidates.
pub fn candidate_recall<'a, I>(ground_truth: &BTreeSet<EntityId>, candidates: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a EntityId>,
{
    if ground_truth.is_empty() {
        return Err(Error::InsufficientData("empty ground-truth event set".into()));
    }
    let found: BTreeSet<&EntityId> = candidates
        .into_iter()
        .filter(|c| ground_truth.contains(*c))
        .collect();
    Ok(found.len() as f64 / ground_truth.len() as f64)
}
