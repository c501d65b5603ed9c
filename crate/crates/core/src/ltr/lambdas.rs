//! LambdaRank gradients weighted by |ΔnDCG|.

use crate::eval::metrics::{discount, ideal_dcg_at_k};

/// Rank (1-based) of every item when sorted by descending score, ties by index.
pub fn ranks_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

fn truncated_discount(rank: usize, k: usize) -> f64 {
    if rank <= k {
        discount(rank)
    } else {
        0.0
    }
}

fn swap_delta(labels: &[f64], ranks: &[usize], ideal: f64, i: usize, j: usize, k: usize) -> f64 {
    if ideal <= 0.0 {
        return 0.0;
    }
    let dg = labels[i] - labels[j];
    let dd = truncated_discount(ranks[i], k) - truncated_discount(ranks[j], k);
    (dg * dd).abs() / ideal
}

/// |nDCG@k after swapping the ranks of items `i` and `j` − nDCG@k now|.
pub fn delta_ndcg(labels: &[f64], scores: &[f64], i: usize, j: usize, k: usize) -> f64 {
    let ranks = ranks_by_score(scores);
    swap_delta(labels, &ranks, ideal_dcg_at_k(labels, k), i, j, k)
}

/// Per-item lambdas (positive pushes an item up) and second-order weights.
pub fn compute_lambdas(labels: &[f64], scores: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = labels.len();
    let mut lambdas = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let ideal = ideal_dcg_at_k(labels, k);
    if ideal <= 0.0 {
        return (lambdas, hessians);
    }
    let ranks = ranks_by_score(scores);
    for i in 0..n {
        for j in 0..n {
            if labels[i] <= labels[j] {
                continue;
            }
            let delta = swap_delta(labels, &ranks, ideal, i, j, k);
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (scores[i] - scores[j]).exp());
            lambdas[i] += rho * delta;
            lambdas[j] -= rho * delta;
            let h = rho * (1.0 - rho) * delta;
            hessians[i] += h;
            hessians[j] += h;
        }
    }
    (lambdas, hessians)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::ndcg_at_k;

    /// nDCG@k of labels ordered by an explicit permutation.
    fn ndcg_of_order(labels: &[f64], order: &[usize], k: usize) -> f64 {
        let ordered: Vec<f64> = order.iter().map(|&i| labels[i]).collect();
        ndcg_at_k(&ordered, k).unwrap()
    }

    fn order_of(scores: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order
    }

    #[test]
    fn two_item_worked_value() {
        // label-0 item ranked first: nDCG = 1/log2(3); swapped: 1
        let d = delta_ndcg(&[1.0, 0.0], &[0.0, 1.0], 0, 1, 10);
        assert!((d - (1.0 - 1.0 / 3f64.log2())).abs() < 1e-15);
        assert!((d - 0.3691).abs() < 1e-4);
    }

    #[test]
    fn equal_labels_and_truncation() {
        assert_eq!(delta_ndcg(&[1.0, 1.0, 0.0], &[3.0, 2.0, 1.0], 0, 1, 10), 0.0);
        let labels = [1.0, 0.0, 0.0, 1.0, 0.5];
        let scores = [5.0, 4.0, 3.0, 2.0, 1.0];
        // items 3 and 4 sit at ranks 4 and 5, both beyond k = 2
        assert_eq!(delta_ndcg(&labels, &scores, 3, 4, 2), 0.0);
    }

    #[test]
    fn matches_brute_force_swaps() {
        let labels = [0.7, 0.0, 0.2, 1.0, 0.0, 0.1, 0.4, 0.2];
        let scores = [0.3, 1.2, -0.5, 0.0, 0.8, 0.9, -1.0, 0.1];
        for k in [1, 3, 5, 10] {
            let order = order_of(&scores);
            let base = ndcg_of_order(&labels, &order, k);
            for i in 0..labels.len() {
                for j in 0..labels.len() {
                    if i == j {
                        continue;
                    }
                    let mut swapped = order.clone();
                    let (pi, pj) = (
                        swapped.iter().position(|&x| x == i).unwrap(),
                        swapped.iter().position(|&x| x == j).unwrap(),
                    );
                    swapped.swap(pi, pj);
                    let brute = (ndcg_of_order(&labels, &swapped, k) - base).abs();
                    let fast = delta_ndcg(&labels, &scores, i, j, k);
                    assert!((brute - fast).abs() < 1e-12, "k={k} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn lambda_signs_and_conservation() {
        let (l, h) = compute_lambdas(&[1.0, 0.0], &[0.0, 1.0], 10);
        assert!(l[0] > 0.0 && l[1] < 0.0);
        assert_eq!(l[0], -l[1]);
        assert!(h[0] > 0.0 && h[0] == h[1]);

        let (l, _) = compute_lambdas(&[0.5, 0.5, 0.5], &[1.0, 2.0, 3.0], 10);
        assert!(l.iter().all(|&x| x == 0.0));

        let labels = [0.7, 0.0, 0.2, 1.0, 0.0, 0.1];
        let (l, _) = compute_lambdas(&labels, &[0.3, 1.2, -0.5, 0.0, 0.8, 0.9], 10);
        assert!(l.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn rho_is_negated_logistic_loss_derivative() {
        let loss = |si: f64, sj: f64| (1.0 + (-(si - sj)).exp()).ln();
        let h = 1e-6;
        for &(si, sj) in &[(0.0, 1.0), (2.0, -1.0), (-0.3, 0.4), (5.0, 5.0)] {
            let rho = 1.0 / (1.0 + f64::exp(si - sj));
            let fd = (loss(si + h, sj) - loss(si - h, sj)) / (2.0 * h);
            assert!(((-fd) - rho).abs() / rho < 1e-6);
        }
    }

    #[test]
    fn ranks() {
        assert_eq!(ranks_by_score(&[0.1, 0.5, 0.5, -1.0]), vec![3, 1, 2, 4]);
    }
}
