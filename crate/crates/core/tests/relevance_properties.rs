use std::collections::BTreeSet;

use eventrank::clickstream::{
    balance_clicks, build_ground_truth, split_folds, ClickTable, RelevanceTable,
};
use eventrank::kg::{EntityId, LanguageCode};
use proptest::prelude::*;

const CODES: [&str; 4] = ["de", "fr", "it", "es"];

type Clicks = Vec<(usize, u8, u8, u64)>;

fn clicks(max_lang: usize) -> impl Strategy<Value = Clicks> {
    prop::collection::vec((0..max_lang, 0u8..12, 0u8..12, 1u64..10_000), 1..80)
}

fn id(prefix: &str, n: u8) -> EntityId {
    EntityId::new(format!("{prefix}{n}")).unwrap()
}

fn tables(clicks: &Clicks, scale: impl Fn(usize) -> u64) -> Vec<ClickTable> {
    let mut t: Vec<ClickTable> = CODES.iter().map(|c| ClickTable::new(LanguageCode::new(c).unwrap())).collect();
    for &(l, s, v, c) in clicks {
        t[l].add(id("e", s), id("v", v), c * scale(l)).unwrap();
    }
    t.into_iter().filter(|t| !t.is_empty()).collect()
}

proptest! {
    #[test]
    fn shares_sum_to_one(c in clicks(4)) {
        let b = balance_clicks(&tables(&c, |_| 1)).unwrap();
        for (s, t) in b.pairs() {
            let sum: f64 = b.languages().iter().map(|l| b.relevance(s, t, l).unwrap()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn global_rescaling_changes_nothing(c in clicks(4), k in 2u64..500) {
        let a = balance_clicks(&tables(&c, |_| 1)).unwrap();
        let b = balance_clicks(&tables(&c, |_| k)).unwrap();
        for (s, t) in a.pairs() {
            for l in a.languages() {
                prop_assert!((a.relevance(s, t, l).unwrap() - b.relevance(s, t, l).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn one_language_scaled_alone_changes_nothing(c in clicks(3), k in 2u64..500, which in 0usize..3) {
        let a = balance_clicks(&tables(&c, |_| 1)).unwrap();
        let b = balance_clicks(&tables(&c, |l| if l == which { k } else { 1 })).unwrap();
        for (s, t) in a.pairs() {
            for l in a.languages() {
                prop_assert!((a.relevance(s, t, l).unwrap() - b.relevance(s, t, l).unwrap()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn single_language_relevance_is_one(c in clicks(1)) {
        let b = balance_clicks(&tables(&c, |_| 1)).unwrap();
        let de = LanguageCode::new("de").unwrap();
        for (s, t) in b.pairs() {
            prop_assert_eq!(b.relevance(s, t, &de).unwrap(), 1.0);
        }
    }

    #[test]
    fn ground_truth_puts_positives_first(c in clicks(3), seed in any::<u64>()) {
        let b = balance_clicks(&tables(&c, |_| 1)).unwrap();
        let events: BTreeSet<EntityId> = (0..40).map(|n| id("v", n)).collect();
        let rel = RelevanceTable::from_balanced(&b, &events);
        for l in rel.languages().clone() {
            let gt = build_ground_truth(&l, &rel, &events, seed).unwrap();
            for entry in &gt.entries {
                let n_pos = entry.positives().count();
                prop_assert!(n_pos >= 1);
                prop_assert_eq!(entry.items.len(), 2 * n_pos);
                for w in entry.items[..n_pos].windows(2) {
                    prop_assert!(w[0].1 >= w[1].1);
                }
                for (e, r) in &entry.items[n_pos..] {
                    prop_assert_eq!(*r, 0.0);
                    prop_assert!(rel.get(&entry.query, e, &l).unwrap_or(0.0) == 0.0);
                }
            }
        }
    }

    #[test]
    fn folds_partition_queries(n in 2usize..60, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let queries: Vec<EntityId> = (0..n).map(|i| EntityId::new(format!("q{i}")).unwrap()).collect();
        let f = split_folds(queries.iter(), k, seed).unwrap();
        let sizes = f.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for q in &queries {
            prop_assert!(f.fold_of(q).is_some());
        }
    }
}
