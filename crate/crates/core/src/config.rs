//! Pipeline configuration: a flat `key = value` file with dotted keys.
//!
//! Relative paths are resolved against the directory holding the file.
//! Lines starting with `#` are comments; unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::embeddings::{EmbedConfig, WalkBias, WalkConfig};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::kg::LanguageCode;
use crate::ltr::LambdaMartConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    /// A query counts toward candidate recall only with more positives than this.
    pub recall_min_positives: usize,
    /// Train the ablation configurations concurrently.
    pub parallel_ablation: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            recall_min_positives: 10,
            parallel_ablation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub entities: PathBuf,
    pub countries: PathBuf,
    pub links: BTreeMap<LanguageCode, PathBuf>,
    pub clicks: BTreeMap<LanguageCode, PathBuf>,
    pub languages: Vec<LanguageCode>,
    pub seed: u64,
    pub workers: usize,
    pub output: PathBuf,
    pub candidate_k: usize,
    pub walk: WalkConfig,
    pub embed: EmbedConfig,
    pub ltr: LambdaMartConfig,
    pub features: FeatureConfig,
    pub eval: EvalConfig,
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{raw}`")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{raw}`"))),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if pairs.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Self::from_pairs(&pairs, base)
    }

    fn from_pairs(pairs: &BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let path = |raw: &str| {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut cfg = PipelineConfig {
            entities: PathBuf::new(),
            countries: PathBuf::new(),
            links: BTreeMap::new(),
            clicks: BTreeMap::new(),
            languages: Vec::new(),
            seed: 0,
            workers: 1,
            output: path("out"),
            candidate_k: 200,
            walk: WalkConfig::default(),
            embed: EmbedConfig::default(),
            ltr: LambdaMartConfig::default(),
            features: FeatureConfig::default(),
            eval: EvalConfig::default(),
        };
        let (mut bias, mut p, mut q) = ("uniform".to_string(), 4.0, 0.5);
        let (mut have_entities, mut have_countries) = (false, false);
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "data.entities" => {
                    cfg.entities = path(v);
                    have_entities = true;
                }
                "data.countries" => {
                    cfg.countries = path(v);
                    have_countries = true;
                }
                "languages" => {
                    cfg.languages = v
                        .split(',')
                        .map(|s| LanguageCode::new(s.trim()))
                        .collect::<Result<_>>()
                        .map_err(|e| Error::Config(format!("`languages`: {e}")))?;
                }
                "seed" => cfg.seed = value(k, v)?,
                "workers" => cfg.workers = value(k, v)?,
                "output" => cfg.output = path(v),
                "candidate_k" => cfg.candidate_k = value(k, v)?,
                "walk.walks_per_node" => cfg.walk.walks_per_node = value(k, v)?,
                "walk.length" => cfg.walk.walk_length = value(k, v)?,
                "walk.bias" => bias = v.to_string(),
                "walk.p" => p = value(k, v)?,
                "walk.q" => q = value(k, v)?,
                "walk.undirected" => cfg.walk.treat_undirected = flag(k, v)?,
                "embed.dim" => cfg.embed.dim = value(k, v)?,
                "embed.window" => cfg.embed.window = value(k, v)?,
                "embed.negatives" => cfg.embed.negatives = value(k, v)?,
                "embed.epochs" => cfg.embed.epochs = value(k, v)?,
                "embed.learning_rate" => cfg.embed.initial_lr = value(k, v)?,
                "ltr.n_trees" => cfg.ltr.n_trees = value(k, v)?,
                "ltr.learning_rate" => cfg.ltr.learning_rate = value(k, v)?,
                "ltr.max_leaves" => cfg.ltr.max_leaves = value(k, v)?,
                "ltr.min_samples_leaf" => cfg.ltr.min_samples_leaf = value(k, v)?,
                "ltr.l2_leaf_reg" => cfg.ltr.l2_leaf_reg = value(k, v)?,
                "ltr.ndcg_truncation" => cfg.ltr.ndcg_truncation = value(k, v)?,
                "features.missing_distance" => cfg.features.missing_distance = value(k, v)?,
                "features.missing_time" => cfg.features.missing_time = value(k, v)?,
                "features.reference_date" => {
                    cfg.features.reference_date = NaiveDate::parse_from_str(v, "%Y-%m-%d")
                        .map_err(|_| Error::Config(format!("`{k}`: expected YYYY-MM-DD, got `{v}`")))?
                }
                "eval.folds" => cfg.eval.folds = value(k, v)?,
                "eval.recall_min_positives" => cfg.eval.recall_min_positives = value(k, v)?,
                "eval.parallel_ablation" => cfg.eval.parallel_ablation = flag(k, v)?,
                other => {
                    let lang_key = |prefix: &str| {
                        other
                            .strip_prefix(prefix)
                            .map(|l| LanguageCode::new(l).map_err(|e| Error::Config(format!("`{other}`: {e}"))))
                    };
                    if let Some(lang) = lang_key("data.links.") {
                        cfg.links.insert(lang?, path(v));
                    } else if let Some(lang) = lang_key("data.clicks.") {
                        cfg.clicks.insert(lang?, path(v));
                    } else {
                        return Err(Error::Config(format!("unknown key `{other}`")));
                    }
                }
            }
        }
        cfg.walk.bias = match bias.as_str() {
            "uniform" => WalkBias::Uniform,
            "node2vec" => WalkBias::Node2Vec { p, q },
            other => {
                return Err(Error::Config(format!(
                    "`walk.bias`: expected uniform or node2vec, got `{other}`"
                )))
            }
        };
        if !have_entities || !have_countries {
            return Err(Error::Config("`data.entities` and `data.countries` are required".into()));
        }
        if cfg.languages.is_empty() {
            cfg.languages = cfg.links.keys().cloned().collect();
        }
        cfg.set_seed(cfg.seed);
        cfg.set_workers(cfg.workers);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.walk.seed = seed;
        self.embed.seed = seed;
        self.ltr.seed = seed;
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.workers = workers;
        self.embed.workers = workers;
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::Config("no languages configured".into()));
        }
        for l in &self.languages {
            if !self.links.contains_key(l) {
                return Err(Error::Config(format!("missing `data.links.{l}`")));
            }
            if !self.clicks.contains_key(l) {
                return Err(Error::Config(format!("missing `data.clicks.{l}`")));
            }
        }
        if self.candidate_k < 1 {
            return Err(Error::Config("`candidate_k` must be >= 1".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("`workers` must be >= 1".into()));
        }
        if self.eval.folds < 2 {
            return Err(Error::Config("`eval.folds` must be >= 2".into()));
        }
        self.walk.validate()?;
        self.embed.validate()?;
        self.ltr.validate()?;
        self.features.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# toy
data.entities = entities.tsv
data.countries = countries.tsv
data.links.de = links_de.tsv
data.clicks.de = clicks_de.tsv
";

    #[test]
    fn minimal_file_with_defaults() {
        let c = PipelineConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(c.entities, Path::new("/data/entities.tsv"));
        assert_eq!(c.languages, vec![LanguageCode::new("de").unwrap()]);
        assert_eq!(c.candidate_k, 200);
        assert_eq!(c.embed.dim, 128);
        assert_eq!(c.ltr.n_trees, 100);
        assert_eq!(c.eval.folds, 5);
        assert_eq!(c.output, Path::new("/data/out"));
    }

    #[test]
    fn overrides_and_seed_propagation() {
        let text = format!(
            "{MINIMAL}seed = 9\nworkers = 3\nembed.dim = 16\nwalk.bias = node2vec\nwalk.p = 2\nltr.n_trees = 7\nfeatures.reference_date = 2020-01-01\noutput = /tmp/x\n"
        );
        let c = PipelineConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!((c.walk.seed, c.embed.seed, c.ltr.seed), (9, 9, 9));
        assert_eq!(c.embed.workers, 3);
        assert_eq!(c.embed.dim, 16);
        assert_eq!(c.walk.bias, WalkBias::Node2Vec { p: 2.0, q: 0.5 });
        assert_eq!(c.ltr.n_trees, 7);
        assert_eq!(c.output, Path::new("/tmp/x"));
    }

    #[test]
    fn rejects_bad_files() {
        for extra in [
            "embed.colour = red\n",
            "seed = 1\nseed = 2\n",
            "embed.dim = many\n",
            "candidate_k = 0\n",
            "no equals sign\n",
            "languages = de,fr\n",
            "walk.bias = levy\n",
        ] {
            let text = format!("{MINIMAL}{extra}");
            let err = PipelineConfig::parse(&text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{extra}: {err}");
        }
        assert!(PipelineConfig::parse("data.entities = e.tsv\n", Path::new(".")).is_err());
    }
}
