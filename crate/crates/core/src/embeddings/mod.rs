//! Language-specific node embeddings: random walks over a link set,
//! skip-gram training and cosine candidate retrieval.

mod sgns;
mod walks;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::{EntityId, LanguageCode};
use crate::tsv;

pub use sgns::{pair_objective, sigmoid, train_embeddings, EmbedConfig, PairGradient, UNIGRAM_POWER};
pub use walks::{generate_walks, WalkBias, WalkConfig, WalkCorpus, Walker};

/// Entity vectors of one language, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    language: LanguageCode,
    dim: usize,
    vectors: BTreeMap<EntityId, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(
        language: LanguageCode,
        dim: usize,
        vectors: BTreeMap<EntityId, Vec<f64>>,
    ) -> Result<Self> {
        for (id, v) in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(dim, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InsufficientData(format!("non-finite vector for `{id}`")));
            }
        }
        Ok(EmbeddingTable {
            language,
            dim,
            vectors,
        })
    }

    pub fn language(&self) -> &LanguageCode {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &EntityId) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Cosine of two entities' vectors, or `None` if either is missing or zero.
    pub fn similarity(&self, a: &EntityId, b: &EntityId) -> Option<f64> {
        cosine(self.get(a)?, self.get(b)?).ok()
    }

    /// Writes `dim=<d>` followed by `id<TAB>v1<TAB>...<TAB>vd` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        tsv::write_file(path, |w| {
            writeln!(w, "dim={}", self.dim)?;
            for (id, v) in &self.vectors {
                write!(w, "{id}")?;
                for x in v {
                    write!(w, "\t{x}")?;
                }
                writeln!(w)?;
            }
            Ok(())
        })
    }

    pub fn load(path: &Path, language: LanguageCode) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut vectors = BTreeMap::new();
        tsv::for_each_record(path, |rec| {
            let bad = |m: String| Error::parse(path, rec.line, m);
            let Some(d) = dim else {
                let header = rec.fields.join("\t");
                let d = header
                    .strip_prefix("dim=")
                    .and_then(|s| s.trim().parse::<usize>().ok())
                    .ok_or_else(|| bad(format!("expected `dim=<d>` header, got `{header}`")))?;
                dim = Some(d);
                return Ok(());
            };
            if rec.fields.len() != d + 1 {
                return Err(bad(format!(
                    "expected {} values, found {}",
                    d,
                    rec.fields.len() - 1
                )));
            }
            let id = EntityId::new(rec.fields[0]).map_err(bad)?;
            let v = rec.fields[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad float `{s}`"))))
                .collect::<Result<Vec<f64>>>()?;
            if vectors.insert(id.clone(), v).is_some() {
                return Err(bad(format!("duplicate entity `{id}`")));
            }
            Ok(())
        })?;
        let dim = dim.ok_or_else(|| Error::parse(path, 1, "missing `dim=<d>` header"))?;
        EmbeddingTable::new(language, dim, vectors)
    }
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// The `k` embedded events most similar to `query`, excluding the query itself.
///
/// Exact scan; ties are ordered by id. Events with a zero vector are skipped.
pub fn candidate_events(
    query: &EntityId,
    k: usize,
    table: &EmbeddingTable,
    events: &BTreeSet<EntityId>,
) -> Result<Vec<(EntityId, f64)>> {
    let q = table
        .get(query)
        .ok_or_else(|| Error::NotEmbedded(query.to_string()))?;
    let mut scored: Vec<(EntityId, f64)> = events
        .iter()
        .filter(|e| *e != query)
        .filter_map(|e| {
            let v = table.get(e)?;
            cosine(q, v).ok().map(|s| (e.clone(), s))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn de() -> LanguageCode {
        LanguageCode::new("de").unwrap()
    }

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = entries[0].1.len();
        EmbeddingTable::new(
            de(),
            dim,
            entries.iter().map(|(k, v)| (id(k), v.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_values() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 4 / (sqrt 5 * sqrt 5)
        assert!((cosine(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn candidates_ordering_and_exclusion() {
        let t = table(&[
            ("q", &[1.0, 0.0]),
            ("same", &[2.0, 0.0]),
            ("mid", &[1.0, 1.0]),
            ("far", &[-1.0, 0.0]),
            ("tie", &[1.0, 1.0]),
        ]);
        let events: BTreeSet<EntityId> = ["q", "same", "mid", "far", "tie", "unembedded"]
            .iter()
            .map(|s| id(s))
            .collect();
        let c = candidate_events(&id("q"), 10, &t, &events).unwrap();
        let ids: Vec<&str> = c.iter().map(|(e, _)| e.as_str()).collect();
        assert_eq!(ids, vec!["same", "mid", "tie", "far"]);
        assert!((c[0].1 - 1.0).abs() < 1e-15);
        assert!(c.windows(2).all(|w| w[0].1 >= w[1].1));

        let top2 = candidate_events(&id("q"), 2, &t, &events).unwrap();
        assert_eq!(top2.len(), 2);
        assert!(matches!(
            candidate_events(&id("unembedded"), 2, &t, &events),
            Err(Error::NotEmbedded(_))
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let t = table(&[("a", &[0.1, -2.5e-7, 3.0]), ("b", &[1.0 / 3.0, 0.0, -1.0])]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.tsv");
        t.save(&p).unwrap();
        let back = EmbeddingTable::load(&p, de()).unwrap();
        assert_eq!(back.dim(), 3);
        for (k, v) in t.iter() {
            let w = back.get(k).unwrap();
            assert!(v.iter().zip(w).all(|(x, y)| (x - y).abs() <= 1e-6));
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.tsv");
        std::fs::write(&p, "a\t1\t2\n").unwrap();
        assert!(EmbeddingTable::load(&p, de()).is_err());
        std::fs::write(&p, "dim=2\na\t1\n").unwrap();
        assert!(EmbeddingTable::load(&p, de()).is_err());
    }
}
