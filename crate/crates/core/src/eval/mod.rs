//! Ranking metrics, single-feature baselines, cross-validation, ablation and
//! feature correlation.

pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use crate::clickstream::FoldAssignment;
use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::kg::{EntityId, LanguageCode};
use crate::ltr::{train, LambdaMartConfig, QueryGroup, TrainingSet};
use crate::tsv;

pub use metrics::{
    average_precision_at_k, binarize, candidate_recall, dcg_at_k, discount, ideal_dcg_at_k,
    map_at_k, ndcg_at_k,
};

/// Cut-off used for every reported ranking metric.
pub const REPORT_K: usize = 10;

/// Events of one query in descending score order, ties by id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: EntityId,
    pub language: LanguageCode,
    items: Vec<(EntityId, f64)>,
}

impl RankedList {
    pub fn from_scores(
        query: EntityId,
        language: LanguageCode,
        mut items: Vec<(EntityId, f64)>,
    ) -> Result<Self> {
        if items.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::InsufficientData(format!("NaN score for query `{query}`")));
        }
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InsufficientData(format!("duplicate event `{}`", w[0].0)));
        }
        Ok(RankedList {
            query,
            language,
            items,
        })
    }

    pub fn items(&self) -> &[(EntityId, f64)] {
        &self.items
    }

    pub fn events(&self) -> impl Iterator<Item = &EntityId> {
        self.items.iter().map(|(e, _)| e)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Single-feature rankers used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BaselineFeature {
    MilneWitten,
    EmbeddingSimilarity,
}

impl BaselineFeature {
    pub const ALL: [BaselineFeature; 2] =
        [BaselineFeature::MilneWitten, BaselineFeature::EmbeddingSimilarity];

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.column()]
    }

    pub fn column(self) -> usize {
        match self {
            BaselineFeature::MilneWitten => 8,
            BaselineFeature::EmbeddingSimilarity => 9,
        }
    }

    pub fn value(self, fv: &FeatureVector) -> f64 {
        fv.to_array()[self.column()]
    }
}

/// Ranks candidates by one feature, descending, ties by id.
pub fn rank_by_feature(
    query: &EntityId,
    language: &LanguageCode,
    candidates: &[(EntityId, FeatureVector)],
    feature: BaselineFeature,
) -> Result<RankedList> {
    RankedList::from_scores(
        query.clone(),
        language.clone(),
        candidates.iter().map(|(e, fv)| (e.clone(), feature.value(fv))).collect(),
    )
}

/// nDCG@k and AP@k of one group ranked by `scores`.
pub fn score_group(group: &QueryGroup, scores: &[f64], k: usize) -> Result<(f64, f64)> {
    let items = group.events.iter().cloned().zip(scores.iter().copied()).collect();
    let ranked = RankedList::from_scores(group.query.clone(), group.language.clone(), items)?;
    let label_of: BTreeMap<&EntityId, f64> = group.events.iter().zip(&group.labels).map(|(e, &l)| (e, l)).collect();
    let labels: Vec<f64> = ranked.events().map(|e| label_of[e]).collect();
    Ok((ndcg_at_k(&labels, k)?, average_precision_at_k(&binarize(&labels), k)?))
}

/// Arithmetic mean; errors on an empty slice.
pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("mean of zero values".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Test-fold metrics of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldScore {
    pub fold: usize,
    pub queries: usize,
    pub ndcg: f64,
    pub map: f64,
}

/// Per-fold scores of the trained ranker and each baseline for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub language: LanguageCode,
    /// Method name → per-fold scores.
    pub methods: BTreeMap<String, Vec<FoldScore>>,
}

impl CvResult {
    /// Mean over folds of the per-fold means, as (nDCG, MAP).
    pub fn mean(&self, method: &str) -> Result<(f64, f64)> {
        let folds = self
            .methods
            .get(method)
            .ok_or_else(|| Error::Internal(format!("no results for `{method}`")))?;
        let n: Vec<f64> = folds.iter().map(|f| f.ndcg).collect();
        let m: Vec<f64> = folds.iter().map(|f| f.map).collect();
        Ok((mean(&n)?, mean(&m)?))
    }
}

/// Name under which the trained ranker appears in reports.
pub const LTR_METHOD: &str = "ltr";

/// k-fold cross-validation of one language's groups. Baselines are scored on
/// the same test folds when their columns are present.
pub fn cross_validate(
    ts: &TrainingSet,
    folds: &FoldAssignment,
    config: &LambdaMartConfig,
    with_baselines: bool,
) -> Result<CvResult> {
    let language = match ts.groups().first() {
        Some(g) => g.language.clone(),
        None => return Err(Error::InsufficientData("cross-validation on zero groups".into())),
    };
    if ts.groups().iter().any(|g| g.language != language) {
        return Err(Error::Internal("cross-validation mixes languages".into()));
    }
    let baseline_cols: Vec<(BaselineFeature, usize)> = if with_baselines {
        BaselineFeature::ALL
            .iter()
            .filter_map(|b| {
                ts.feature_names()
                    .iter()
                    .position(|n| n == b.name())
                    .map(|c| (*b, c))
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut methods: BTreeMap<String, Vec<FoldScore>> = BTreeMap::new();
    for fold in 0..folds.k() {
        let in_test = |g: &QueryGroup| folds.fold_of(&g.query) == Some(fold);
        let test = ts.filter(in_test);
        let train_set = ts.filter(|g| folds.fold_of(&g.query).is_some() && !in_test(g));
        if test.is_empty() || train_set.is_empty() {
            return Err(Error::InsufficientData(format!(
                "fold {fold} of {language} has an empty train or test side"
            )));
        }
        let model = train(&train_set, config)?;
        let mut score_with = |name: &str, scorer: &dyn Fn(&[f64]) -> f64| -> Result<()> {
            let mut n = Vec::new();
            let mut m = Vec::new();
            for g in test.groups() {
                let scores: Vec<f64> = g.rows.iter().map(|r| scorer(r)).collect();
                let (a, b) = score_group(g, &scores, REPORT_K)?;
                n.push(a);
                m.push(b);
            }
            methods.entry(name.to_string()).or_default().push(FoldScore {
                fold,
                queries: n.len(),
                ndcg: mean(&n)?,
                map: mean(&m)?,
            });
            Ok(())
        };
        score_with(LTR_METHOD, &|r| model.predict_row(r))?;
        for &(b, col) in &baseline_cols {
            score_with(b.name(), &|r| r[col])?;
        }
    }
    Ok(CvResult { language, methods })
}

/// Splits a training set into per-language sets.
pub fn by_language(ts: &TrainingSet) -> BTreeMap<LanguageCode, TrainingSet> {
    let langs: BTreeSet<&LanguageCode> = ts.groups().iter().map(|g| &g.language).collect();
    langs
        .into_iter()
        .map(|l| (l.clone(), ts.filter(|g| &g.language == l)))
        .collect()
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// `None` for the full model.
    pub removed: Option<FeatureGroup>,
    pub ndcg: f64,
}

impl AblationRow {
    pub fn label(&self) -> String {
        match self.removed {
            None => "full".to_string(),
            Some(g) => format!("without_{}", g.name()),
        }
    }
}

/// Cross-validated nDCG@10 of the full model and of each leave-one-group-out
/// model. With several languages the per-language means are averaged.
pub fn run_ablation(
    ts: &TrainingSet,
    folds: &BTreeMap<LanguageCode, FoldAssignment>,
    groups: &[FeatureGroup],
    config: &LambdaMartConfig,
    parallel: bool,
) -> Result<Vec<AblationRow>> {
    if ts.feature_names().len() != FEATURE_COUNT {
        return Err(Error::FeatureOrderMismatch {
            expected: FEATURE_NAMES.join(","),
            actual: ts.feature_names().join(","),
        });
    }
    let mut configs: Vec<Option<FeatureGroup>> = vec![None];
    configs.extend(groups.iter().copied().map(Some));
    let per_lang = by_language(ts);
    let run = |removed: &Option<FeatureGroup>| -> Result<AblationRow> {
        let mut lang_means = Vec::new();
        for (lang, set) in &per_lang {
            let set = match removed {
                Some(g) => set.without_columns(g.columns()),
                None => set.clone(),
            };
            let f = folds
                .get(lang)
                .ok_or_else(|| Error::Internal(format!("no folds for {lang}")))?;
            lang_means.push(cross_validate(&set, f, config, false)?.mean(LTR_METHOD)?.0);
        }
        Ok(AblationRow {
            removed: *removed,
            ndcg: mean(&lang_means)?,
        })
    };
    if parallel {
        configs.par_iter().map(run).collect()
    } else {
        configs.iter().map(run).collect()
    }
}

pub fn save_ablation(rows: &[AblationRow], path: &Path) -> Result<()> {
    tsv::write_file(path, |w| {
        writeln!(w, "# configuration\tndcg@{REPORT_K}")?;
        for r in rows {
            writeln!(w, "{}\t{}", r.label(), r.ndcg)?;
        }
        Ok(())
    })
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// |PCC| between every pair of feature columns; `None` where a column is constant.
pub fn correlation_matrix(rows: &[FeatureVector]) -> Result<Vec<Vec<Option<f64>>>> {
    let columns: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|c| rows.iter().map(|r| r.to_array()[c]).collect())
        .collect();
    let mut out = vec![vec![None; FEATURE_COUNT]; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        for j in 0..FEATURE_COUNT {
            out[i][j] = match pearson(&columns[i], &columns[j]) {
                Ok(r) => Some(r.abs()),
                Err(Error::UndefinedCorrelation) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(out)
}

/// Writes the matrix with feature names as header row and first column;
/// undefined entries are written as `NA`.
pub fn save_correlation_matrix(matrix: &[Vec<Option<f64>>], path: &Path) -> Result<()> {
    tsv::write_file(path, |w| {
        write!(w, "feature")?;
        for name in FEATURE_NAMES {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for (name, row) in FEATURE_NAMES.iter().zip(matrix) {
            write!(w, "{name}")?;
            for v in row {
                match v {
                    Some(x) => write!(w, "\t{x}")?,
                    None => write!(w, "\tNA")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// One metric value in the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    /// Language code, or `all` for the cross-language average.
    pub language: String,
    /// Fold index, `mean`, or `all` for metrics without folds.
    pub fold: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

/// Candidate recall summary of one language.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallSummary {
    pub language: LanguageCode,
    pub candidate_k: usize,
    /// Mean recall over eligible queries; `None` if no query was eligible.
    pub recall: Option<f64>,
    pub eligible_queries: usize,
}

impl EvalReport {
    /// Assembles per-fold and mean rows for every method and language, plus
    /// candidate recall. Averages across languages only when there are several.
    pub fn build(cv: &[CvResult], recall: &[RecallSummary]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut push = |method: &str, language: &str, fold: String, metric: String, value: f64| {
            rows.push(ReportRow {
                method: method.to_string(),
                language: language.to_string(),
                fold,
                metric,
                value,
            })
        };
        let ndcg_name = format!("ndcg@{REPORT_K}");
        let map_name = format!("map@{REPORT_K}");
        let mut across: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for res in cv {
            let lang = res.language.as_str();
            for (method, folds) in &res.methods {
                for f in folds {
                    push(method, lang, f.fold.to_string(), ndcg_name.clone(), f.ndcg);
                    push(method, lang, f.fold.to_string(), map_name.clone(), f.map);
                }
                let (n, m) = res.mean(method)?;
                push(method, lang, "mean".into(), ndcg_name.clone(), n);
                push(method, lang, "mean".into(), map_name.clone(), m);
                let e = across.entry(method).or_default();
                e.0.push(n);
                e.1.push(m);
            }
        }
        if cv.len() > 1 {
            for (method, (n, m)) in &across {
                push(method, "all", "mean".into(), ndcg_name.clone(), mean(n)?);
                push(method, "all", "mean".into(), map_name.clone(), mean(m)?);
            }
        }
        let mut recalls = Vec::new();
        for r in recall {
            let metric = format!("recall@{}", r.candidate_k);
            push("candidates", r.language.as_str(), "all".into(), "eligible_queries".into(), r.eligible_queries as f64);
            if let Some(v) = r.recall {
                push("candidates", r.language.as_str(), "all".into(), metric, v);
                recalls.push((r.candidate_k, v));
            }
        }
        if recall.len() > 1 && !recalls.is_empty() {
            let k = recalls[0].0;
            let values: Vec<f64> = recalls.iter().map(|r| r.1).collect();
            push("candidates", "all", "all".into(), format!("recall@{k}"), mean(&values)?);
        }
        Ok(EvalReport { rows })
    }

    pub fn get(&self, method: &str, language: &str, fold: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.language == language && r.fold == fold && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        tsv::write_file(path, |w| {
            writeln!(w, "# method\tlang\tfold\tmetric\tvalue")?;
            for r in &self.rows {
                writeln!(w, "{}\t{}\t{}\t{}\t{}", r.method, r.language, r.fold, r.metric, r.value)?;
            }
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        tsv::for_each_record(path, |rec| {
            if rec.fields.len() != 5 {
                return Err(Error::parse(path, rec.line, format!("expected 5 fields, found {}", rec.fields.len())));
            }
            let value = rec.fields[4]
                .parse()
                .map_err(|_| Error::parse(path, rec.line, format!("bad value `{}`", rec.fields[4])))?;
            rows.push(ReportRow {
                method: rec.fields[0].to_string(),
                language: rec.fields[1].to_string(),
                fold: rec.fields[2].to_string(),
                metric: rec.fields[3].to_string(),
                value,
            });
            Ok(())
        })?;
        Ok(EvalReport { rows })
    }
}
