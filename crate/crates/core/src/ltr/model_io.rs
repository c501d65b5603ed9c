//! Plain-text model files.
//!
//! ```text
//! eventrank-model
//! version 1
//! features <name>\t<name>...
//! learning_rate 0.1
//! base_score 0
//! n_trees 100
//! max_leaves 16
//! min_samples_leaf 1
//! l2_leaf_reg 1
//! ndcg_truncation 10
//! seed 0
//! trees <count>
//! tree <index> <node count>
//! split <id> <feature> <threshold> <left> <right>
//! leaf <id> <value>
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so values survive exactly.

use std::path::Path;

use super::{LambdaMartConfig, Node, RegressionTree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::tsv;

pub const MODEL_MAGIC: &str = "eventrank-model";
pub const MODEL_VERSION: u32 = 1;

pub fn save_model(model: &TreeEnsemble, path: &Path) -> Result<()> {
    tsv::write_file(path, |w| {
        let c = &model.config;
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "version {MODEL_VERSION}")?;
        writeln!(w, "features {}", model.feature_names.join("\t"))?;
        writeln!(w, "learning_rate {}", model.learning_rate)?;
        writeln!(w, "base_score {}", model.base_score)?;
        writeln!(w, "n_trees {}", c.n_trees)?;
        writeln!(w, "max_leaves {}", c.max_leaves)?;
        writeln!(w, "min_samples_leaf {}", c.min_samples_leaf)?;
        writeln!(w, "l2_leaf_reg {}", c.l2_leaf_reg)?;
        writeln!(w, "ndcg_truncation {}", c.ndcg_truncation)?;
        writeln!(w, "seed {}", c.seed)?;
        writeln!(w, "trees {}", model.trees.len())?;
        for (i, t) in model.trees.iter().enumerate() {
            writeln!(w, "tree {i} {}", t.nodes().len())?;
            for (id, n) in t.nodes().iter().enumerate() {
                match n {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => writeln!(w, "split {id} {feature} {threshold} {left} {right}")?,
                    Node::Leaf { value } => writeln!(w, "leaf {id} {value}")?,
                }
            }
        }
        writeln!(w, "end")?;
        Ok(())
    })
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of file (truncated model?)")),
        }
    }

    fn err(&self, m: impl Into<String>) -> Error {
        Error::ModelFormat(format!("{}:{}: {}", self.path.display(), self.line, m.into()))
    }

    /// Next line as `<key> <value>`, checking the key.
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ => Err(self.err(format!("expected `{key} ...`, got `{l}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for `{key}`: `{v}`")))
    }
}

fn num<T: std::str::FromStr>(lines: &Lines, s: Option<&str>) -> Result<T> {
    let s = s.ok_or_else(|| lines.err("missing field"))?;
    s.parse().map_err(|_| lines.err(format!("bad number `{s}`")))
}

pub fn load_model(path: &Path) -> Result<TreeEnsemble> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != MODEL_MAGIC {
        return Err(lines.err(format!("not a model file (missing `{MODEL_MAGIC}` header)")));
    }
    let version_line = lines.next()?;
    let Some(v) = version_line.strip_prefix("version ") else {
        return Err(Error::UnversionedModel);
    };
    if v.trim() != MODEL_VERSION.to_string() {
        return Err(lines.err(format!("unsupported model version `{v}`")));
    }
    let feature_names: Vec<String> = lines.field("features")?.split('\t').map(String::from).collect();
    let learning_rate: f64 = lines.parse("learning_rate")?;
    let base_score: f64 = lines.parse("base_score")?;
    let config = LambdaMartConfig {
        n_trees: lines.parse("n_trees")?,
        learning_rate,
        max_leaves: lines.parse("max_leaves")?,
        min_samples_leaf: lines.parse("min_samples_leaf")?,
        l2_leaf_reg: lines.parse("l2_leaf_reg")?,
        ndcg_truncation: lines.parse("ndcg_truncation")?,
        seed: lines.parse("seed")?,
    };
    let n_trees: usize = lines.parse("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let header = lines.field("tree")?;
        let mut parts = header.split(' ');
        let index: usize = num(&lines, parts.next())?;
        let count: usize = num(&lines, parts.next())?;
        if index != t || parts.next().is_some() {
            return Err(lines.err(format!("bad tree header `{header}`")));
        }
        let mut nodes = Vec::with_capacity(count);
        for id in 0..count {
            let l = lines.next()?;
            let mut f = l.split(' ');
            let kind = f.next();
            let got_id: usize = num(&lines, f.next())?;
            if got_id != id {
                return Err(lines.err(format!("expected node {id}, got {got_id}")));
            }
            let node = match kind {
                Some("split") => Node::Split {
                    feature: num(&lines, f.next())?,
                    threshold: num(&lines, f.next())?,
                    left: num(&lines, f.next())?,
                    right: num(&lines, f.next())?,
                },
                Some("leaf") => Node::Leaf {
                    value: num(&lines, f.next())?,
                },
                _ => return Err(lines.err(format!("bad node line `{l}`"))),
            };
            if f.next().is_some() {
                return Err(lines.err(format!("trailing fields in `{l}`")));
            }
            nodes.push(node);
        }
        trees.push(
            RegressionTree::from_nodes(nodes, feature_names.len())
                .map_err(|e| lines.err(format!("tree {t}: {e}")))?,
        );
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(TreeEnsemble {
        trees,
        learning_rate,
        base_score,
        config,
        feature_names,
    })
}
