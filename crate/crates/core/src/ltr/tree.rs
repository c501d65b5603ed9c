//! Second-order regression trees grown best-first.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary tree stored as a node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Builds a tree from a node list, checking that it is well formed.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::ModelFormat("tree without nodes".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::ModelFormat(format!("node {id}: bad split")));
                    }
                    for child in [left, right] {
                        if child <= id || child >= nodes.len() {
                            return Err(Error::ModelFormat(format!(
                                "node {id}: child {child} out of range"
                            )));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::ModelFormat(format!("node {id}: non-finite leaf")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::ModelFormat("nodes do not form a tree".into()));
        }
        Ok(RegressionTree { nodes })
    }

    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Index of the leaf a row lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }
}

/// Growth limits for [`fit_tree`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    g * g / (h + l2)
}

/// Newton leaf output for summed gradient `g` and hessian `h`.
pub fn leaf_value(g: f64, h: f64, l2: f64) -> f64 {
    let denom = h + l2;
    if denom <= 0.0 {
        0.0
    } else {
        -g / denom
    }
}

fn best_split_on_feature(
    rows: &[Vec<f64>],
    grads: &[f64],
    hess: &[f64],
    samples: &[usize],
    feature: usize,
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let mut order = samples.to_vec();
    order.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));
    let (g_total, h_total): (f64, f64) = samples
        .iter()
        .fold((0.0, 0.0), |(g, h), &i| (g + grads[i], h + hess[i]));
    let parent = score(g_total, h_total, params.l2);
    let (mut gl, mut hl) = (0.0, 0.0);
    let mut best: Option<SplitCandidate> = None;
    for pos in 0..order.len() - 1 {
        let i = order[pos];
        gl += grads[i];
        hl += hess[i];
        let (x, next) = (rows[i][feature], rows[order[pos + 1]][feature]);
        let n_left = pos + 1;
        if x == next || n_left < params.min_samples_leaf {
            continue;
        }
        if order.len() - n_left < params.min_samples_leaf {
            break;
        }
        let gain = score(gl, hl, params.l2)
            + score(g_total - gl, h_total - hl, params.l2)
            - parent;
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            let mid = x + (next - x) / 2.0;
            let threshold = if mid < next { mid } else { x };
            best = Some(SplitCandidate {
                feature,
                threshold,
                gain,
            });
        }
    }
    best
}

/// Highest-gain split over all features; ties go to the lower feature index,
/// then the lower threshold.
pub fn best_split(
    rows: &[Vec<f64>],
    grads: &[f64],
    hess: &[f64],
    samples: &[usize],
    params: &TreeParams,
) -> Option<SplitCandidate> {
    if samples.len() < 2 {
        return None;
    }
    let n_features = rows[samples[0]].len();
    let per_feature: Vec<Option<SplitCandidate>> = (0..n_features)
        .into_par_iter()
        .map(|f| best_split_on_feature(rows, grads, hess, samples, f, params))
        .collect();
    per_feature
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<SplitCandidate>, c| match acc {
            Some(b) if b.gain >= c.gain => Some(b),
            _ => Some(c),
        })
}

struct OpenLeaf {
    node: usize,
    samples: Vec<usize>,
    split: Option<SplitCandidate>,
}

/// Fits one tree to per-sample gradients and hessians.
pub fn fit_tree(
    rows: &[Vec<f64>],
    grads: &[f64],
    hess: &[f64],
    params: &TreeParams,
) -> Result<RegressionTree> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("cannot fit a tree to zero samples".into()));
    }
    if grads.len() != rows.len() || hess.len() != rows.len() {
        return Err(Error::DimensionMismatch(rows.len(), grads.len().min(hess.len())));
    }
    let sum = |s: &[usize], v: &[f64]| s.iter().map(|&i| v[i]).sum::<f64>();
    let all: Vec<usize> = (0..rows.len()).collect();
    let mut nodes = vec![Node::Leaf {
        value: leaf_value(sum(&all, grads), sum(&all, hess), params.l2),
    }];
    let root_split = best_split(rows, grads, hess, &all, params);
    let mut open = vec![OpenLeaf {
        node: 0,
        samples: all,
        split: root_split,
    }];
    let mut leaves = 1;
    while leaves < params.max_leaves {
        // open leaves are kept in node-id order, so the first maximum wins ties
        let Some(pick) = open
            .iter()
            .enumerate()
            .filter_map(|(k, l)| l.split.map(|s| (k, s.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (k, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((k, g)),
            })
            .map(|(k, _)| k)
        else {
            break;
        };
        let leaf = open.remove(pick);
        let split = leaf.split.expect("picked leaves have a split");
        let (left_s, right_s): (Vec<usize>, Vec<usize>) = leaf
            .samples
            .iter()
            .partition(|&&i| rows[i][split.feature] <= split.threshold);
        let (left, right) = (nodes.len(), nodes.len() + 1);
        for s in [&left_s, &right_s] {
            nodes.push(Node::Leaf {
                value: leaf_value(sum(s, grads), sum(s, hess), params.l2),
            });
        }
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        leaves += 1;
        for (node, samples) in [(left, left_s), (right, right_s)] {
            let split = best_split(rows, grads, hess, &samples, params);
            open.push(OpenLeaf {
                node,
                samples,
                split,
            });
        }
        open.sort_by_key(|l| l.node);
    }
    Ok(RegressionTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TreeParams {
        TreeParams {
            max_leaves: 16,
            min_samples_leaf: 1,
            l2: 1.0,
        }
    }

    #[test]
    fn zero_gradients_give_zero_leaf() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]];
        let t = fit_tree(&rows, &[0.0; 3], &[1.0; 3], &params()).unwrap();
        assert_eq!(t.nodes(), &[Node::Leaf { value: 0.0 }]);
    }

    #[test]
    fn single_sample_newton_leaf() {
        let t = fit_tree(&[vec![0.5]], &[2.0], &[1.0], &params()).unwrap();
        assert_eq!(t.predict(&[0.5]), -1.0);
    }

    #[test]
    fn empty_sample_set_errors() {
        assert!(fit_tree(&[], &[], &[], &params()).is_err());
    }

    /// Every (feature, threshold) split scored by direct summation.
    fn exhaustive_best(rows: &[Vec<f64>], g: &[f64], h: &[f64], l2: f64) -> (usize, f64, f64) {
        let s = |gs: f64, hs: f64| gs * gs / (hs + l2);
        let (gt, ht) = (g.iter().sum::<f64>(), h.iter().sum::<f64>());
        let mut best = (usize::MAX, f64::NAN, f64::NEG_INFINITY);
        for f in 0..rows[0].len() {
            let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let (mut gl, mut hl) = (0.0, 0.0);
                for i in 0..rows.len() {
                    if rows[i][f] <= thr {
                        gl += g[i];
                        hl += h[i];
                    }
                }
                let gain = s(gl, hl) + s(gt - gl, ht - hl) - s(gt, ht);
                if gain > best.2 + 1e-12 {
                    best = (f, thr, gain);
                }
            }
        }
        best
    }

    #[test]
    fn separable_first_split_matches_exhaustive_scan() {
        // feature 1 separates the gradient signs; features 0 and 2 are noise
        let rows = vec![
            vec![0.3, 1.0, 7.0],
            vec![0.9, 2.0, 1.0],
            vec![0.1, 3.0, 4.0],
            vec![0.5, 4.0, 2.0],
            vec![0.7, 10.0, 3.0],
            vec![0.2, 11.0, 8.0],
            vec![0.8, 12.0, 5.0],
            vec![0.4, 13.0, 6.0],
        ];
        let g = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let h = [1.0; 8];
        let p = TreeParams {
            max_leaves: 2,
            ..params()
        };
        let t = fit_tree(&rows, &g, &h, &p).unwrap();
        let (f, thr, _) = exhaustive_best(&rows, &g, &h, 1.0);
        assert_eq!((f, thr), (1, 7.0));
        match t.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((feature, threshold), (f, thr)),
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&[0.0, 1.0, 0.0]), 4.0 / 5.0);
        assert_eq!(t.predict(&[0.0, 20.0, 0.0]), -4.0 / 5.0);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // features 0 and 1 induce the same partition
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let g = [1.0, 1.0, -1.0, -1.0];
        let t = fit_tree(&rows, &g, &[1.0; 4], &params()).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn limits_are_respected() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let g: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let h = vec![1.0; 40];
        for max_leaves in [1, 2, 3, 5, 8] {
            let p = TreeParams {
                max_leaves,
                min_samples_leaf: 3,
                l2: 1.0,
            };
            let t = fit_tree(&rows, &g, &h, &p).unwrap();
            assert!(t.leaf_count() <= max_leaves);
            let mut counts = vec![0; t.nodes().len()];
            for r in &rows {
                counts[t.leaf_index(r)] += 1;
            }
            for (id, n) in t.nodes().iter().enumerate() {
                if matches!(n, Node::Leaf { .. }) {
                    assert!(counts[id] >= 3, "leaf {id} has {}", counts[id]);
                }
            }
        }
    }

    #[test]
    fn from_nodes_validation() {
        let ok = vec![
            Node::Split {
                feature: 0,
                threshold: 1.0,
                left: 1,
                right: 2,
            },
            Node::Leaf { value: 1.0 },
            Node::Leaf { value: 2.0 },
        ];
        assert!(RegressionTree::from_nodes(ok.clone(), 1).is_ok());
        assert!(RegressionTree::from_nodes(ok.clone(), 0).is_err());
        let mut cyclic = ok;
        cyclic[0] = Node::Split {
            feature: 0,
            threshold: 1.0,
            left: 1,
            right: 1,
        };
        assert!(RegressionTree::from_nodes(cyclic, 1).is_err());
        assert!(RegressionTree::from_nodes(vec![], 1).is_err());
    }
}
