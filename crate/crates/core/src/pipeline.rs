//! Resumable batch pipeline over the configured data files.
//!
//! Every stage records a fingerprint of its inputs and outputs in
//! `manifest.tsv` inside the output directory. A stage is skipped when its
//! inputs are unchanged, its outputs are intact, and no stage it depends on
//! ran during the current invocation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::clickstream::{
    balance_clicks, build_ground_truth, load_ground_truth, save_ground_truth, split_folds,
    ClickTable, FoldAssignment, RelevanceTable,
};
use crate::config::PipelineConfig;
use crate::embeddings::{candidate_events, generate_walks, train_embeddings, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{
    by_language, candidate_recall, correlation_matrix, cross_validate, mean, run_ablation,
    save_ablation, save_correlation_matrix, AblationRow, EvalReport, RecallSummary,
};
use crate::features::{extract, load_feature_rows, save_feature_rows, FeatureGroup, FeatureRow};
use crate::kg::{load_entities, CountryPolygonTable, EntityId, KnowledgeGraph, LanguageCode, LinkSet};
use crate::ltr::{load_model, save_model, train, TrainingSet, TreeEnsemble};
use crate::tsv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Embed,
    Relevance,
    GroundTruth,
    Features,
    Train,
    Evaluate,
    Ablate,
    Correlate,
}

impl Stage {
    /// Every stage in execution order.
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Embed,
        Stage::Relevance,
        Stage::GroundTruth,
        Stage::Features,
        Stage::Train,
        Stage::Evaluate,
        Stage::Ablate,
        Stage::Correlate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Relevance => "relevance",
            Stage::GroundTruth => "groundtruth",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Ablate => "ablate",
            Stage::Correlate => "correlate",
        }
    }

    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Embed | Stage::Relevance => &[Stage::Ingest],
            Stage::GroundTruth => &[Stage::Relevance],
            Stage::Features => &[Stage::GroundTruth, Stage::Embed],
            Stage::Train | Stage::Ablate | Stage::Correlate => &[Stage::Features],
            Stage::Evaluate => &[Stage::Train],
        }
    }

    /// The stage and everything it transitively depends on, in execution order.
    pub fn closure(self) -> Vec<Stage> {
        let mut need = BTreeSet::from([self]);
        for s in Stage::ALL.iter().rev() {
            if need.contains(s) {
                need.extend(s.deps());
            }
        }
        Stage::ALL.into_iter().filter(|s| need.contains(s)).collect()
    }
}

/// Output file locations inside the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Artifacts { dir: dir.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.tsv")
    }
    pub fn ingest(&self) -> PathBuf {
        self.dir.join("ingest.tsv")
    }
    pub fn embeddings(&self, lang: &LanguageCode) -> PathBuf {
        self.dir.join(format!("embeddings_{lang}.tsv"))
    }
    pub fn relevance(&self) -> PathBuf {
        self.dir.join("relevance.tsv")
    }
    pub fn ground_truth(&self) -> PathBuf {
        self.dir.join("ground_truth.tsv")
    }
    pub fn features(&self) -> PathBuf {
        self.dir.join("features.tsv")
    }
    pub fn model(&self, lang: &LanguageCode) -> PathBuf {
        self.dir.join(format!("model_{lang}.txt"))
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.tsv")
    }
    pub fn ablation(&self) -> PathBuf {
        self.dir.join("ablation.tsv")
    }
    pub fn correlation(&self) -> PathBuf {
        self.dir.join("correlation.tsv")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ManifestEntry {
    inputs: String,
    outputs: String,
}

fn read_manifest(path: &Path) -> Result<BTreeMap<String, ManifestEntry>> {
    let mut m = BTreeMap::new();
    if !path.exists() {
        return Ok(m);
    }
    tsv::for_each_record(path, |rec| {
        if rec.fields.len() != 3 {
            return Err(Error::parse(path, rec.line, "expected `stage inputs outputs`"));
        }
        m.insert(
            rec.fields[0].to_string(),
            ManifestEntry {
                inputs: rec.fields[1].to_string(),
                outputs: rec.fields[2].to_string(),
            },
        );
        Ok(())
    })?;
    Ok(m)
}

fn write_manifest(path: &Path, m: &BTreeMap<String, ManifestEntry>) -> Result<()> {
    tsv::write_file(path, |w| {
        writeln!(w, "# stage\tinputs_sha256\toutputs_sha256")?;
        for (stage, e) in m {
            writeln!(w, "{stage}\t{}\t{}", e.inputs, e.outputs)?;
        }
        Ok(())
    })
}

/// SHA-256 over labelled strings and file contents.
struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(label.as_bytes());
        Fingerprint(h)
    }

    fn text(&mut self, s: &str) {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
    }

    fn file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(&bytes);
        Ok(())
    }

    fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// What happened to one stage during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub ran: bool,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    art: Artifacts,
    force: bool,
    ran: BTreeSet<Stage>,
    graph: OnceLock<KnowledgeGraph>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, force: bool) -> Self {
        let art = Artifacts::new(cfg.output.clone());
        Pipeline {
            cfg,
            art,
            force,
            ran: BTreeSet::new(),
            graph: OnceLock::new(),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn artifacts(&self) -> &Artifacts {
        &self.art
    }

    /// Runs `target` and its dependencies inside a pool of `workers` threads.
    pub fn run(&mut self, target: Stage) -> Result<Vec<StageOutcome>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| {
            target
                .closure()
                .into_iter()
                .map(|s| self.run_stage(s).map_err(|e| e.in_stage(s.name())))
                .collect()
        })
    }

    fn graph(&self) -> Result<&KnowledgeGraph> {
        if let Some(g) = self.graph.get() {
            return Ok(g);
        }
        let g = load_graph(&self.cfg)?;
        Ok(self.graph.get_or_init(|| g))
    }

    fn languages(&self) -> &[LanguageCode] {
        &self.cfg.languages
    }

    fn inputs(&self, stage: Stage) -> Result<String> {
        let c = &self.cfg;
        let mut fp = Fingerprint::new(stage.name());
        let langs = self.languages();
        fp.text(&format!("{langs:?}"));
        match stage {
            Stage::Ingest => {
                fp.file(&c.entities)?;
                fp.file(&c.countries)?;
                for l in langs {
                    fp.file(&c.links[l])?;
                }
            }
            Stage::Embed => {
                fp.text(&format!("{:?}{:?}", c.walk, c.embed));
                for l in langs {
                    fp.file(&c.links[l])?;
                }
            }
            Stage::Relevance => {
                fp.file(&c.entities)?;
                for l in langs {
                    fp.file(&c.clicks[l])?;
                }
            }
            Stage::GroundTruth => {
                fp.text(&c.seed.to_string());
                fp.file(&c.entities)?;
                fp.file(&self.art.relevance())?;
            }
            Stage::Features => {
                fp.text(&format!("{:?}", c.features));
                fp.file(&self.art.ground_truth())?;
                fp.file(&self.art.ingest())?;
                for l in langs {
                    fp.file(&self.art.embeddings(l))?;
                }
            }
            Stage::Train => {
                fp.text(&format!("{:?}", c.ltr));
                fp.file(&self.art.features())?;
            }
            Stage::Evaluate => {
                fp.text(&format!("{:?}{:?}{}{}", c.ltr, c.eval, c.candidate_k, c.seed));
                fp.file(&self.art.features())?;
                fp.file(&self.art.ground_truth())?;
                for l in langs {
                    fp.file(&self.art.embeddings(l))?;
                    fp.file(&self.art.model(l))?;
                }
            }
            Stage::Ablate => {
                fp.text(&format!("{:?}{:?}{}", c.ltr, c.eval, c.seed));
                fp.file(&self.art.features())?;
            }
            Stage::Correlate => fp.file(&self.art.features())?,
        }
        Ok(fp.finish())
    }

    fn outputs(&self, stage: Stage) -> Vec<PathBuf> {
        let a = &self.art;
        match stage {
            Stage::Ingest => vec![a.ingest()],
            Stage::Embed => self.languages().iter().map(|l| a.embeddings(l)).collect(),
            Stage::Relevance => vec![a.relevance()],
            Stage::GroundTruth => vec![a.ground_truth()],
            Stage::Features => vec![a.features()],
            Stage::Train => self.languages().iter().map(|l| a.model(l)).collect(),
            Stage::Evaluate => vec![a.report()],
            Stage::Ablate => vec![a.ablation()],
            Stage::Correlate => vec![a.correlation()],
        }
    }

    fn outputs_fingerprint(&self, stage: Stage) -> Result<Option<String>> {
        let mut fp = Fingerprint::new(stage.name());
        for p in self.outputs(stage) {
            if !p.exists() {
                return Ok(None);
            }
            fp.file(&p)?;
        }
        Ok(Some(fp.finish()))
    }

    fn run_stage(&mut self, stage: Stage) -> Result<StageOutcome> {
        let inputs = self.inputs(stage)?;
        let manifest_path = self.art.manifest();
        let mut manifest = read_manifest(&manifest_path)?;
        let upstream_ran = stage.deps().iter().any(|d| self.ran.contains(d));
        let up_to_date = !self.force
            && !upstream_ran
            && match (manifest.get(stage.name()), self.outputs_fingerprint(stage)?) {
                (Some(e), Some(out)) => e.inputs == inputs && e.outputs == out,
                _ => false,
            };
        if up_to_date {
            log::info!("{}: up to date, skipped", stage.name());
            return Ok(StageOutcome { stage, ran: false });
        }
        log::info!("{}: running", stage.name());
        match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Embed => self.embed()?,
            Stage::Relevance => self.relevance()?,
            Stage::GroundTruth => self.ground_truth()?,
            Stage::Features => self.features()?,
            Stage::Train => self.train()?,
            Stage::Evaluate => self.evaluate()?,
            Stage::Ablate => self.ablate()?,
            Stage::Correlate => self.correlate()?,
        }
        let outputs = self
            .outputs_fingerprint(stage)?
            .ok_or_else(|| Error::Internal(format!("{} did not write its outputs", stage.name())))?;
        manifest.insert(stage.name().to_string(), ManifestEntry { inputs, outputs });
        write_manifest(&manifest_path, &manifest)?;
        self.ran.insert(stage);
        Ok(StageOutcome { stage, ran: true })
    }

    fn ingest(&self) -> Result<()> {
        let g = self.graph()?;
        tsv::write_file(&self.art.ingest(), |w| {
            writeln!(w, "# lang\tnodes\tedges\tself_loops_dropped\tduplicates_dropped")?;
            writeln!(w, "all\t{}\t{}\t0\t0", g.entity_count(), g.events().len())?;
            for l in self.languages() {
                let ls = g.link_set(l).map_err(std::io::Error::other)?;
                writeln!(
                    w,
                    "{l}\t{}\t{}\t{}\t{}",
                    ls.node_count(),
                    ls.edge_count(),
                    ls.self_loops_dropped(),
                    ls.duplicates_dropped()
                )?;
            }
            Ok(())
        })
    }

    fn embed(&self) -> Result<()> {
        let g = self.graph()?;
        for l in self.languages() {
            let corpus = generate_walks(g.link_set(l)?, &self.cfg.walk)?;
            log::info!("embed[{l}]: {} walks, {} tokens", corpus.len(), corpus.token_count());
            let table = train_embeddings(&corpus, &self.cfg.embed, l.clone())?;
            table.save(&self.art.embeddings(l))?;
        }
        Ok(())
    }

    fn relevance(&self) -> Result<()> {
        let g = self.graph()?;
        let tables = self
            .languages()
            .iter()
            .map(|l| ClickTable::load(&self.cfg.clicks[l], l.clone()))
            .collect::<Result<Vec<_>>>()?;
        let balanced = balance_clicks(&tables)?;
        RelevanceTable::from_balanced(&balanced, g.events()).save(&self.art.relevance())
    }

    fn ground_truth(&self) -> Result<()> {
        let g = self.graph()?;
        let rel = RelevanceTable::load(&self.art.relevance())?;
        let mut truths = Vec::new();
        for l in self.languages() {
            let mut gt = build_ground_truth(l, &rel, g.events(), self.cfg.seed)?;
            let before = gt.entries.len();
            gt.entries.retain(|e| g.contains(&e.query));
            if gt.entries.len() < before {
                log::warn!(
                    "groundtruth[{l}]: dropped {} queries missing from the entity table",
                    before - gt.entries.len()
                );
            }
            truths.push(gt);
        }
        save_ground_truth(&truths, &self.art.ground_truth())
    }

    fn features(&self) -> Result<()> {
        let g = self.graph()?;
        let mut rows = Vec::new();
        for gt in load_ground_truth(&self.art.ground_truth())? {
            let emb = EmbeddingTable::load(&self.art.embeddings(&gt.language), gt.language.clone())?;
            let per_query: Vec<Vec<FeatureRow>> = gt
                .entries
                .par_iter()
                .map(|entry| {
                    entry
                        .items
                        .iter()
                        .map(|(event, rel)| {
                            Ok(FeatureRow {
                                query: entry.query.clone(),
                                event: event.clone(),
                                language: gt.language.clone(),
                                rel: *rel,
                                features: extract(
                                    &entry.query,
                                    event,
                                    &gt.language,
                                    g,
                                    Some(&emb),
                                    &self.cfg.features,
                                )?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            rows.extend(per_query.into_iter().flatten());
        }
        save_feature_rows(&rows, &self.art.features())
    }

    fn training_set(&self) -> Result<TrainingSet> {
        TrainingSet::from_feature_rows(&load_feature_rows(&self.art.features())?)
    }

    fn train(&self) -> Result<()> {
        let per_lang = by_language(&self.training_set()?);
        for l in self.languages() {
            let set = per_lang
                .get(l)
                .ok_or_else(|| Error::InsufficientData(format!("no training queries for `{l}`")))?;
            let model = train(set, &self.cfg.ltr)?;
            save_model(&model, &self.art.model(l))?;
        }
        Ok(())
    }

    fn folds(&self, ts: &TrainingSet) -> Result<BTreeMap<LanguageCode, FoldAssignment>> {
        fold_assignments(ts, &self.cfg)
    }

    fn evaluate(&self) -> Result<()> {
        let g = self.graph()?;
        let ts = self.training_set()?;
        let folds = self.folds(&ts)?;
        let mut cv = Vec::new();
        for (l, set) in by_language(&ts) {
            // the stored model must load; it is not used for the CV scores
            load_model(&self.art.model(&l))?;
            cv.push(cross_validate(&set, &folds[&l], &self.cfg.ltr, true)?);
        }
        let mut recall = Vec::new();
        for gt in load_ground_truth(&self.art.ground_truth())? {
            let emb = EmbeddingTable::load(&self.art.embeddings(&gt.language), gt.language.clone())?;
            let mut values = Vec::new();
            for entry in &gt.entries {
                let positives: BTreeSet<EntityId> = entry.positives().cloned().collect();
                if positives.len() <= self.cfg.eval.recall_min_positives {
                    continue;
                }
                let r = match candidate_events(&entry.query, self.cfg.candidate_k, &emb, g.events()) {
                    Ok(c) => candidate_recall(&positives, c.iter().map(|(e, _)| e))?,
                    Err(Error::NotEmbedded(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                values.push(r);
            }
            recall.push(RecallSummary {
                language: gt.language.clone(),
                candidate_k: self.cfg.candidate_k,
                recall: if values.is_empty() { None } else { Some(mean(&values)?) },
                eligible_queries: values.len(),
            });
        }
        EvalReport::build(&cv, &recall)?.save(&self.art.report())
    }

    fn ablate(&self) -> Result<()> {
        let rows = ablation_from_rows(&load_feature_rows(&self.art.features())?, &self.cfg)?;
        save_ablation(&rows, &self.art.ablation())
    }

    fn correlate(&self) -> Result<()> {
        let rows = load_feature_rows(&self.art.features())?;
        let fvs: Vec<_> = rows.iter().map(|r| r.features).collect();
        save_correlation_matrix(&correlation_matrix(&fvs)?, &self.art.correlation())
    }
}

/// Query-level folds per language, seeded by the pipeline seed.
pub fn fold_assignments(ts: &TrainingSet, cfg: &PipelineConfig) -> Result<BTreeMap<LanguageCode, FoldAssignment>> {
    by_language(ts)
        .into_iter()
        .map(|(l, set)| {
            let f = split_folds(set.groups().iter().map(|g| &g.query), cfg.eval.folds, cfg.seed)?;
            Ok((l, f))
        })
        .collect()
}

/// Leave-one-group-out ablation over an arbitrary feature matrix.
pub fn ablation_from_rows(rows: &[FeatureRow], cfg: &PipelineConfig) -> Result<Vec<AblationRow>> {
    let ts = TrainingSet::from_feature_rows(rows)?;
    let folds = fold_assignments(&ts, cfg)?;
    run_ablation(&ts, &folds, &FeatureGroup::ALL, &cfg.ltr, cfg.eval.parallel_ablation)
}

/// Loads entities, country polygons and every configured link set.
pub fn load_graph(cfg: &PipelineConfig) -> Result<KnowledgeGraph> {
    let entities = load_entities(&cfg.entities)?;
    let countries = CountryPolygonTable::load(&cfg.countries)?;
    let links = cfg
        .languages
        .iter()
        .map(|l| LinkSet::load(&cfg.links[l], l.clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(KnowledgeGraph::new(entities, links, countries))
}

/// One recommended event.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Recommendation {
    pub rank: usize,
    pub event: String,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RecommendationList {
    pub query: String,
    pub language: String,
    pub items: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("rank\tevent\tlabel\tscore\n");
        for r in &self.items {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", r.rank, r.event, r.label, r.score));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Candidate generation, feature extraction and model scoring for one query.
pub fn recommend_with(
    graph: &KnowledgeGraph,
    embeddings: &EmbeddingTable,
    model: &TreeEnsemble,
    cfg: &PipelineConfig,
    query: &str,
    language: &LanguageCode,
    n: usize,
) -> Result<RecommendationList> {
    let query = EntityId::new(query).map_err(|_| graph.unknown(query))?;
    graph.entity(&query)?;
    let candidates = candidate_events(&query, cfg.candidate_k, embeddings, graph.events())?;
    let scored = candidates
        .par_iter()
        .map(|(event, _)| {
            let fv = extract(&query, event, language, graph, Some(embeddings), &cfg.features)?;
            Ok((event.clone(), model.predict(&fv)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let ranked = crate::eval::RankedList::from_scores(query.clone(), language.clone(), scored)?;
    let items = ranked
        .items()
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, (e, s))| Recommendation {
            rank: i + 1,
            event: e.to_string(),
            label: graph.entities()[e].label.clone(),
            score: *s,
        })
        .collect();
    Ok(RecommendationList {
        query: query.to_string(),
        language: language.to_string(),
        items,
    })
}

/// Loads the trained artifacts of `language` and ranks events for `query`.
pub fn recommend(cfg: &PipelineConfig, query: &str, language: &LanguageCode, n: usize) -> Result<RecommendationList> {
    if !cfg.languages.contains(language) {
        return Err(Error::UnknownLanguage(language.to_string()));
    }
    let art = Artifacts::new(cfg.output.clone());
    let graph = load_graph(cfg)?;
    match EntityId::new(query) {
        Ok(id) if graph.contains(&id) => {}
        _ => return Err(graph.unknown(query)),
    }
    let emb = EmbeddingTable::load(&art.embeddings(language), language.clone())?;
    let model = load_model(&art.model(language))?;
    recommend_with(&graph, &emb, &model, cfg, query, language, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closures_are_ordered() {
        assert_eq!(Stage::Ingest.closure(), vec![Stage::Ingest]);
        assert_eq!(
            Stage::Evaluate.closure(),
            Stage::ALL[..7].to_vec(),
        );
        assert_eq!(
            Stage::Correlate.closure(),
            vec![Stage::Ingest, Stage::Embed, Stage::Relevance, Stage::GroundTruth, Stage::Features, Stage::Correlate]
        );
    }

    #[test]
    fn fingerprint_separates_fields() {
        let mut a = Fingerprint::new("x");
        a.text("ab");
        a.text("c");
        let mut b = Fingerprint::new("x");
        b.text("a");
        b.text("bc");
        assert_ne!(a.finish(), b.finish());
    }
}
