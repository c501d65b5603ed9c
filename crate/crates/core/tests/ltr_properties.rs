use eventrank::features::{FEATURE_COUNT, FEATURE_NAMES};
use eventrank::kg::{EntityId, LanguageCode};
use eventrank::ltr::{
    compute_lambdas, fit_tree, train_verbose, LambdaMartConfig, QueryGroup, TrainingSet, TreeParams,
};
use eventrank::synthetic::separable_ranking;
use proptest::prelude::*;

fn group() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..15).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], n),
            prop::collection::vec(prop_oneof![Just(0.0), -3.0..3.0f64], n),
        )
    })
}

fn one_feature_set(xs: &[f64], labels: &[f64]) -> TrainingSet {
    let rows = xs
        .iter()
        .map(|&x| {
            let mut r = vec![0.0; FEATURE_COUNT];
            r[0] = x;
            r
        })
        .collect();
    let g = QueryGroup {
        query: EntityId::new("q").unwrap(),
        language: LanguageCode::new("xx").unwrap(),
        events: (0..xs.len()).map(|i| EntityId::new(format!("v{i:02}")).unwrap()).collect(),
        rows,
        labels: labels.to_vec(),
    };
    TrainingSet::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), vec![g]).unwrap()
}

proptest! {
    #[test]
    fn lambdas_sum_to_zero((labels, scores) in group(), k in 1usize..12) {
        let (lambdas, hess) = compute_lambdas(&labels, &scores, k);
        prop_assert!(lambdas.iter().sum::<f64>().abs() <= 1e-9);
        prop_assert!(hess.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn stumps_ignore_monotone_transforms(
        xs in prop::collection::vec(-5.0..5.0f64, 3..25),
        grads in prop::collection::vec(-1.0..1.0f64, 25),
    ) {
        let n = xs.len();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let transformed: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x.exp() * 3.0 + 1.0]).collect();
        let hess = vec![1.0; n];
        let params = TreeParams { max_leaves: 2, min_samples_leaf: 1, l2: 1.0 };
        let a = fit_tree(&rows, &grads[..n], &hess, &params).unwrap();
        let b = fit_tree(&transformed, &grads[..n], &hess, &params).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.leaf_index(&rows[i]), b.leaf_index(&transformed[i]));
            prop_assert!((a.predict(&rows[i]) - b.predict(&transformed[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn one_feature_rankings_survive_monotone_transforms(
        xs in prop::collection::vec(0.0..1.0f64, 4..20),
        noise in prop::collection::vec(0.0..0.1f64, 20),
    ) {
        let labels: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| x * x + e).collect();
        let cfg = LambdaMartConfig { n_trees: 5, max_leaves: 2, ..LambdaMartConfig::default() };
        let raw = one_feature_set(&xs, &labels);
        let cubed: Vec<f64> = xs.iter().map(|x| x.powi(3) - 2.0).collect();
        let moved = one_feature_set(&cubed, &labels);
        let (ma, _) = train_verbose(&raw, &cfg).unwrap();
        let (mb, _) = train_verbose(&moved, &cfg).unwrap();
        let ga = &raw.groups()[0];
        let gb = &moved.groups()[0];
        for i in 0..xs.len() {
            prop_assert!((ma.predict_row(&ga.rows[i]) - mb.predict_row(&gb.rows[i])).abs() <= 1e-9);
        }
    }
}

#[test]
fn training_ndcg_ends_above_start() {
    let ts = separable_ranking(3, 20, 15, 0.05);
    let cfg = LambdaMartConfig { n_trees: 30, ..LambdaMartConfig::default() };
    let (_, trace) = train_verbose(&ts, &cfg).unwrap();
    assert_eq!(trace.ndcg.len(), 31);
    assert!(trace.ndcg.last().unwrap() >= trace.ndcg.first().unwrap());
    assert!(trace.max_lambda_sum.iter().all(|&s| s <= 1e-9));
}
