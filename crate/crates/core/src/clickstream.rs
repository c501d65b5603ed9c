//! Click counts, cross-language balancing, language-specific relevance and
//! ground-truth construction.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::kg::{EntityId, LanguageCode};
use crate::{seed, tsv};

type Pair = (EntityId, EntityId);

/// Per-language click counts from a source to a target entity.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickTable {
    language: LanguageCode,
    counts: BTreeMap<Pair, u64>,
}

impl ClickTable {
    pub fn new(language: LanguageCode) -> Self {
        ClickTable {
            language,
            counts: BTreeMap::new(),
        }
    }

    /// Adds `count` clicks for the pair; counts for repeated pairs are summed.
    pub fn add(&mut self, source: EntityId, target: EntityId, count: u64) -> Result<()> {
        if count == 0 {
            return Err(Error::InsufficientData(format!(
                "non-positive click count for ({source}, {target})"
            )));
        }
        *self.counts.entry((source, target)).or_insert(0) += count;
        Ok(())
    }

    /// Loads `source<TAB>target<TAB>count`.
    pub fn load(path: &Path, language: LanguageCode) -> Result<Self> {
        let mut table = ClickTable::new(language);
        tsv::for_each_record(path, |rec| {
            let bad = |m: String| Error::parse(path, rec.line, m);
            if rec.fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", rec.fields.len())));
            }
            let source = EntityId::new(rec.fields[0]).map_err(bad)?;
            let target = EntityId::new(rec.fields[1]).map_err(bad)?;
            let raw = rec.fields[2].trim();
            let count: i64 = raw
                .parse()
                .map_err(|_| bad(format!("bad click count `{raw}`")))?;
            if count <= 0 {
                return Err(bad(format!("non-positive click count {count}")));
            }
            table.add(source, target, count as u64).map_err(|e| bad(e.to_string()))
        })?;
        Ok(table)
    }

    pub fn language(&self) -> &LanguageCode {
        &self.language
    }

    pub fn get(&self, source: &EntityId, target: &EntityId) -> u64 {
        // BTreeMap lookup needs an owned tuple key.
        self.counts
            .get(&(source.clone(), target.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &EntityId, u64)> {
        self.counts.iter().map(|((s, t), &c)| (s, t, c))
    }
}

/// Click counts rescaled so every language carries the same total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedClicks {
    languages: BTreeSet<LanguageCode>,
    by_pair: BTreeMap<Pair, BTreeMap<LanguageCode, f64>>,
}

/// balanced(s, t, l) = clicks(s, t, l) * (total over all languages) / (total in l).
///
/// Languages with no clicks are dropped from the language set.
pub fn balance_clicks(tables: &[ClickTable]) -> Result<BalancedClicks> {
    if tables.is_empty() {
        return Err(Error::InsufficientData("no click tables".into()));
    }
    let grand_total: f64 = tables.iter().map(|t| t.total() as f64).sum();
    let mut languages = BTreeSet::new();
    let mut by_pair: BTreeMap<Pair, BTreeMap<LanguageCode, f64>> = BTreeMap::new();
    for table in tables {
        let total = table.total();
        if total == 0 {
            log::warn!("clicks[{}]: no clicks, language excluded", table.language);
            continue;
        }
        languages.insert(table.language.clone());
        let scale = grand_total / total as f64;
        for (pair, &count) in &table.counts {
            *by_pair
                .entry(pair.clone())
                .or_default()
                .entry(table.language.clone())
                .or_insert(0.0) += count as f64 * scale;
        }
    }
    if languages.is_empty() {
        return Err(Error::InsufficientData("no language has any clicks".into()));
    }
    Ok(BalancedClicks { languages, by_pair })
}

impl BalancedClicks {
    pub fn languages(&self) -> &BTreeSet<LanguageCode> {
        &self.languages
    }

    pub fn get(&self, source: &EntityId, target: &EntityId, language: &LanguageCode) -> f64 {
        self.by_pair
            .get(&(source.clone(), target.clone()))
            .and_then(|m| m.get(language))
            .copied()
            .unwrap_or(0.0)
    }

    /// Share of the pair's balanced clicks that falls on `language`.
    pub fn relevance(
        &self,
        source: &EntityId,
        target: &EntityId,
        language: &LanguageCode,
    ) -> Result<f64> {
        let per_lang = self
            .by_pair
            .get(&(source.clone(), target.clone()))
            .ok_or_else(|| Error::UndefinedRelevance {
                source_id: source.to_string(),
                target_id: target.to_string(),
            })?;
        Ok(share(per_lang, language))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&EntityId, &EntityId)> {
        self.by_pair.keys().map(|(s, t)| (s, t))
    }
}

fn share(per_lang: &BTreeMap<LanguageCode, f64>, language: &LanguageCode) -> f64 {
    let num = per_lang.get(language).copied().unwrap_or(0.0);
    if num == 0.0 {
        return 0.0;
    }
    let den: f64 = per_lang.values().sum();
    num / den
}

/// Language-specific relevance for every clicked (entity, event) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelevanceTable {
    languages: BTreeSet<LanguageCode>,
    rel: BTreeMap<Pair, BTreeMap<LanguageCode, f64>>,
}

impl RelevanceTable {
    /// Keeps only pairs whose target is in `events`.
    pub fn from_balanced(balanced: &BalancedClicks, events: &BTreeSet<EntityId>) -> Self {
        let rel = balanced
            .by_pair
            .iter()
            .filter(|((_, t), _)| events.contains(t))
            .map(|(pair, per_lang)| {
                let shares = balanced
                    .languages
                    .iter()
                    .map(|l| (l.clone(), share(per_lang, l)))
                    .collect();
                (pair.clone(), shares)
            })
            .collect();
        RelevanceTable {
            languages: balanced.languages.clone(),
            rel,
        }
    }

    pub fn languages(&self) -> &BTreeSet<LanguageCode> {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rel.is_empty()
    }

    /// `None` when the pair was never clicked in any language.
    pub fn get(&self, source: &EntityId, event: &EntityId, language: &LanguageCode) -> Option<f64> {
        self.rel
            .get(&(source.clone(), event.clone()))
            .map(|m| m.get(language).copied().unwrap_or(0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &EntityId, &LanguageCode, f64)> {
        self.rel
            .iter()
            .flat_map(|((s, t), m)| m.iter().map(move |(l, &r)| (s, t, l, r)))
    }

    /// Events with positive relevance in `language`, grouped by source entity.
    pub fn positives(&self, language: &LanguageCode) -> BTreeMap<&EntityId, Vec<(&EntityId, f64)>> {
        let mut out: BTreeMap<&EntityId, Vec<(&EntityId, f64)>> = BTreeMap::new();
        for ((s, t), m) in &self.rel {
            if let Some(&r) = m.get(language) {
                if r > 0.0 {
                    out.entry(s).or_default().push((t, r));
                }
            }
        }
        out
    }

    /// Writes `source<TAB>event<TAB>lang<TAB>rel`.
    pub fn save(&self, path: &Path) -> Result<()> {
        tsv::write_file(path, |w| {
            writeln!(w, "# source\tevent\tlang\trel")?;
            for (s, t, l, r) in self.iter() {
                writeln!(w, "{s}\t{t}\t{l}\t{r}")?;
            }
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut table = RelevanceTable::default();
        tsv::for_each_record(path, |rec| {
            let bad = |m: String| Error::parse(path, rec.line, m);
            if rec.fields.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", rec.fields.len())));
            }
            let s = EntityId::new(rec.fields[0]).map_err(bad)?;
            let t = EntityId::new(rec.fields[1]).map_err(bad)?;
            let l = LanguageCode::new(rec.fields[2]).map_err(|e| bad(e.to_string()))?;
            let r: f64 = rec.fields[3]
                .parse()
                .map_err(|_| bad(format!("bad relevance `{}`", rec.fields[3])))?;
            table.languages.insert(l.clone());
            table.rel.entry((s, t)).or_default().insert(l, r);
            Ok(())
        })?;
        Ok(table)
    }
}

/// One query's target list: positives by descending relevance, then sampled negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub query: EntityId,
    pub items: Vec<(EntityId, f64)>,
}

impl GroundTruthEntry {
    pub fn positives(&self) -> impl Iterator<Item = &EntityId> {
        self.items.iter().filter(|(_, r)| *r > 0.0).map(|(e, _)| e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub language: LanguageCode,
    pub entries: Vec<GroundTruthEntry>,
}

/// Builds the ground truth of one language.
///
/// Each source entity with at least one positively relevant event becomes a
/// query. Its positives are sorted by relevance (ties by id) and followed by
/// the same number of negatives drawn without replacement from the events
/// that have zero relevance for it in this language.
pub fn build_ground_truth(
    language: &LanguageCode,
    relevance: &RelevanceTable,
    events: &BTreeSet<EntityId>,
    base_seed: u64,
) -> Result<GroundTruth> {
    let mut entries = Vec::new();
    for (query, mut positives) in relevance.positives(language) {
        positives.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let positive_set: BTreeSet<&EntityId> = positives.iter().map(|(e, _)| *e).collect();
        let eligible: Vec<&EntityId> = events
            .iter()
            .filter(|v| *v != query && !positive_set.contains(v))
            .collect();
        if eligible.len() < positives.len() {
            return Err(Error::InsufficientData(format!(
                "query `{query}` ({language}): {} positives but only {} eligible negatives",
                positives.len(),
                eligible.len()
            )));
        }
        let mut rng = seed::rng(
            base_seed,
            &[b"negatives", language.as_str().as_bytes(), query.as_str().as_bytes()],
        );
        let mut negatives: Vec<&EntityId> = eligible
            .choose_multiple(&mut rng, positives.len())
            .copied()
            .collect();
        negatives.sort();

        let mut items: Vec<(EntityId, f64)> =
            positives.iter().map(|(e, r)| ((*e).clone(), *r)).collect();
        items.extend(negatives.into_iter().map(|e| (e.clone(), 0.0)));
        entries.push(GroundTruthEntry {
            query: query.clone(),
            items,
        });
    }
    Ok(GroundTruth {
        language: language.clone(),
        entries,
    })
}

/// Writes `lang<TAB>query<TAB>rank<TAB>event<TAB>rel`, ranks starting at 1.
pub fn save_ground_truth(truths: &[GroundTruth], path: &Path) -> Result<()> {
    tsv::write_file(path, |w| {
        writeln!(w, "# lang\tquery\trank\tevent\trel")?;
        for gt in truths {
            for entry in &gt.entries {
                for (rank, (event, rel)) in entry.items.iter().enumerate() {
                    writeln!(w, "{}\t{}\t{}\t{event}\t{rel}", gt.language, entry.query, rank + 1)?;
                }
            }
        }
        Ok(())
    })
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut by_lang: BTreeMap<LanguageCode, Vec<GroundTruthEntry>> = BTreeMap::new();
    tsv::for_each_record(path, |rec| {
        let bad = |m: String| Error::parse(path, rec.line, m);
        if rec.fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.fields.len())));
        }
        let lang = LanguageCode::new(rec.fields[0]).map_err(|e| bad(e.to_string()))?;
        let query = EntityId::new(rec.fields[1]).map_err(bad)?;
        let rank: usize = rec.fields[2]
            .parse()
            .map_err(|_| bad(format!("bad rank `{}`", rec.fields[2])))?;
        let event = EntityId::new(rec.fields[3]).map_err(bad)?;
        let rel: f64 = rec.fields[4]
            .parse()
            .map_err(|_| bad(format!("bad rel `{}`", rec.fields[4])))?;
        let entries = by_lang.entry(lang).or_default();
        let starts_new = rank == 1;
        match entries.last_mut() {
            Some(last) if !starts_new && last.query == query && last.items.len() + 1 == rank => {
                last.items.push((event, rel));
            }
            _ if starts_new => entries.push(GroundTruthEntry {
                query,
                items: vec![(event, rel)],
            }),
            _ => return Err(bad(format!("rank {rank} out of sequence"))),
        }
        Ok(())
    })?;
    Ok(by_lang
        .into_iter()
        .map(|(language, entries)| GroundTruth { language, entries })
        .collect())
}

/// Partition of query entities into `k` folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    k: usize,
    folds: BTreeMap<EntityId, usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, query: &EntityId) -> Option<usize> {
        self.folds.get(query).copied()
    }

    pub fn members(&self, fold: usize) -> impl Iterator<Item = &EntityId> {
        self.folds
            .iter()
            .filter(move |(_, &f)| f == fold)
            .map(|(q, _)| q)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Uniformly random, balanced partition of the given query ids.
pub fn split_folds<'a, I>(queries: I, k: usize, base_seed: u64) -> Result<FoldAssignment>
where
    I: IntoIterator<Item = &'a EntityId>,
{
    if k < 2 {
        return Err(Error::InsufficientData(format!("fold count {k} < 2")));
    }
    let mut ids: Vec<&EntityId> = queries.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    if ids.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} queries is fewer than {k} folds",
            ids.len()
        )));
    }
    let mut rng = seed::rng(base_seed, &[b"folds"]);
    ids.shuffle(&mut rng);
    let folds = ids
        .into_iter()
        .enumerate()
        .map(|(i, q)| (q.clone(), i % k))
        .collect();
    Ok(FoldAssignment { k, folds })
}

pub fn split_ground_truth_folds(gt: &GroundTruth, k: usize, base_seed: u64) -> Result<FoldAssignment> {
    split_folds(gt.entries.iter().map(|e| &e.query), k, base_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn lang(s: &str) -> LanguageCode {
        LanguageCode::new(s).unwrap()
    }

    fn load_str(body: &str, l: &str) -> Result<ClickTable> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut f, body.as_bytes()).unwrap();
        ClickTable::load(f.path(), lang(l))
    }

    #[test]
    fn load_single_count() {
        let t = load_str(
            "Coronavirus_pandemic\tCOVID-19_pandemic_in_Germany\t3775\n",
            "de",
        )
        .unwrap();
        assert_eq!(
            t.get(&id("Coronavirus_pandemic"), &id("COVID-19_pandemic_in_Germany")),
            3775
        );
    }

    #[test]
    fn duplicate_pairs_are_summed() {
        let t = load_str("a\tb\t2\na\tb\t3\n", "de").unwrap();
        assert_eq!(t.get(&id("a"), &id("b")), 5);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn zero_and_bad_counts_rejected() {
        assert!(load_str("a\tb\t0\n", "de").is_err());
        assert!(load_str("a\tb\t-4\n", "de").is_err());
        assert!(load_str("a\tb\tmany\n", "de").is_err());
        assert!(load_str("a\tb\n", "de").is_err());
    }

    /// de total 100, fr total 300; the (e, v) pair has 10 de clicks and 30 fr clicks.
    fn two_language_tables() -> Vec<ClickTable> {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("e"), id("v"), 10).unwrap();
        de.add(id("x"), id("y"), 90).unwrap();
        let mut fr = ClickTable::new(lang("fr"));
        fr.add(id("e"), id("v"), 30).unwrap();
        fr.add(id("x"), id("y"), 270).unwrap();
        vec![de, fr]
    }

    #[test]
    fn single_language_balance_is_identity() {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("e"), id("v"), 7).unwrap();
        de.add(id("e"), id("w"), 3).unwrap();
        let b = balance_clicks(&[de]).unwrap();
        assert_eq!(b.get(&id("e"), &id("v"), &lang("de")), 7.0);
        assert_eq!(b.relevance(&id("e"), &id("v"), &lang("de")).unwrap(), 1.0);
    }

    #[test]
    fn two_language_balance_and_relevance() {
        let b = balance_clicks(&two_language_tables()).unwrap();
        // 10 * 400 / 100 and 30 * 400 / 300
        assert!((b.get(&id("e"), &id("v"), &lang("de")) - 40.0).abs() < 1e-12);
        assert!((b.get(&id("e"), &id("v"), &lang("fr")) - 40.0).abs() < 1e-12);
        assert!((b.relevance(&id("e"), &id("v"), &lang("de")).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pair_clicked_in_one_language_only() {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("e"), id("v"), 4).unwrap();
        let mut fr = ClickTable::new(lang("fr"));
        fr.add(id("e"), id("w"), 4).unwrap();
        let b = balance_clicks(&[de, fr]).unwrap();
        assert_eq!(b.relevance(&id("e"), &id("v"), &lang("de")).unwrap(), 1.0);
        assert_eq!(b.relevance(&id("e"), &id("v"), &lang("fr")).unwrap(), 0.0);
        assert!(matches!(
            b.relevance(&id("e"), &id("zzz"), &lang("de")),
            Err(Error::UndefinedRelevance { .. })
        ));
    }

    #[test]
    fn empty_language_is_excluded() {
        let de = ClickTable::new(lang("de"));
        let mut fr = ClickTable::new(lang("fr"));
        fr.add(id("e"), id("v"), 1).unwrap();
        let b = balance_clicks(&[de, fr]).unwrap();
        assert_eq!(b.languages().len(), 1);
        assert!(balance_clicks(&[ClickTable::new(lang("de"))]).is_err());
    }

    fn relevance_for_gt() -> (RelevanceTable, BTreeSet<EntityId>) {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("q"), id("v1"), 70).unwrap();
        de.add(id("q"), id("v2"), 20).unwrap();
        de.add(id("q"), id("v3"), 10).unwrap();
        de.add(id("q"), id("not-an-event"), 10).unwrap();
        let events: BTreeSet<EntityId> = (1..=9).map(|i| id(&format!("v{i}"))).chain([id("q")]).collect();
        let b = balance_clicks(&[de]).unwrap();
        (RelevanceTable::from_balanced(&b, &events), events)
    }

    #[test]
    fn relevance_table_filters_non_events() {
        let (rel, _) = relevance_for_gt();
        assert_eq!(rel.len(), 3);
        assert!(rel.get(&id("q"), &id("not-an-event"), &lang("de")).is_none());
    }

    #[test]
    fn ground_truth_shape() {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("q"), id("v1"), 1).unwrap();
        de.add(id("q"), id("v2"), 1).unwrap();
        de.add(id("q"), id("v3"), 1).unwrap();
        let mut fr = ClickTable::new(lang("fr"));
        fr.add(id("q"), id("v1"), 3).unwrap();
        fr.add(id("q"), id("v2"), 8).unwrap();
        fr.add(id("q"), id("v3"), 9).unwrap();
        fr.add(id("z"), id("z2"), 80).unwrap();
        let events: BTreeSet<EntityId> = (1..=9).map(|i| id(&format!("v{i}"))).chain([id("q")]).collect();
        let rel = RelevanceTable::from_balanced(&balance_clicks(&[de, fr]).unwrap(), &events);
        let gt = build_ground_truth(&lang("de"), &rel, &events, 42).unwrap();
        assert_eq!(gt.entries.len(), 1);
        let entry = &gt.entries[0];
        assert_eq!(entry.items.len(), 6);
        let rels: Vec<f64> = entry.items.iter().map(|(_, r)| *r).collect();
        assert!(rels.windows(2).all(|w| w[0] >= w[1]));
        assert!(rels[3..].iter().all(|&r| r == 0.0));
        assert!(rels[..3].iter().all(|&r| r > 0.0));
        // v1 has the largest de share (1/1 vs 3/100 scaled), v3 the smallest
        assert_eq!(entry.items[0].0, id("v1"));
        assert_eq!(entry.items[2].0, id("v3"));
        for (neg, _) in &entry.items[3..] {
            assert!(!["q", "v1", "v2", "v3"].contains(&neg.as_str()));
        }
    }

    #[test]
    fn ground_truth_ties_break_by_id() {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("q"), id("vb"), 5).unwrap();
        de.add(id("q"), id("va"), 5).unwrap();
        let events: BTreeSet<EntityId> = ["va", "vb", "n1", "n2", "n3"].iter().map(|s| id(s)).collect();
        let rel = RelevanceTable::from_balanced(&balance_clicks(&[de]).unwrap(), &events);
        let gt = build_ground_truth(&lang("de"), &rel, &events, 1).unwrap();
        assert_eq!(gt.entries[0].items[0].0, id("va"));
        assert_eq!(gt.entries[0].items[1].0, id("vb"));
    }

    #[test]
    fn ground_truth_is_deterministic_and_roundtrips() {
        let (rel, events) = relevance_for_gt();
        let a = build_ground_truth(&lang("de"), &rel, &events, 9).unwrap();
        let b = build_ground_truth(&lang("de"), &rel, &events, 9).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
        save_ground_truth(std::slice::from_ref(&a), &pa).unwrap();
        save_ground_truth(&[b], &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        assert_eq!(load_ground_truth(&pa).unwrap(), vec![a]);
    }

    #[test]
    fn too_few_negatives() {
        let mut de = ClickTable::new(lang("de"));
        de.add(id("q"), id("v1"), 1).unwrap();
        de.add(id("q"), id("v2"), 1).unwrap();
        let events: BTreeSet<EntityId> = ["v1", "v2", "v3"].iter().map(|s| id(s)).collect();
        let rel = RelevanceTable::from_balanced(&balance_clicks(&[de]).unwrap(), &events);
        assert!(build_ground_truth(&lang("de"), &rel, &events, 1).is_err());
    }

    fn queries(n: usize) -> Vec<EntityId> {
        (0..n).map(|i| id(&format!("q{i:02}"))).collect()
    }

    #[test]
    fn folds_of_ten() {
        let f = split_folds(&queries(10), 5, 3).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
    }

    #[test]
    fn folds_of_eleven() {
        let f = split_folds(&queries(11), 5, 3).unwrap();
        let mut sizes = f.sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn folds_partition_queries() {
        let qs = queries(17);
        let f = split_folds(&qs, 4, 11).unwrap();
        let mut seen = BTreeSet::new();
        for fold in 0..4 {
            for q in f.members(fold) {
                assert!(seen.insert(q.clone()));
            }
        }
        assert_eq!(seen, qs.iter().cloned().collect());
        assert_eq!(f, split_folds(&qs, 4, 11).unwrap());
    }

    #[test]
    fn fold_errors() {
        assert!(split_folds(&queries(10), 1, 0).is_err());
        assert!(split_folds(&queries(3), 5, 0).is_err());
    }
}
