//! Skip-gram with negative sampling over walk corpora.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::embeddings::{EmbeddingTable, WalkCorpus};
use crate::error::{Error, Result};
use crate::kg::LanguageCode;
use crate::seed;

/// Exponent applied to token counts for the negative-sampling distribution.
pub const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub seed: u64,
    /// 1 trains deterministically; more threads share parameters without locks.
    pub workers: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            seed: 0,
            workers: 1,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim < 2 {
            return fail("embed.dim must be >= 2");
        }
        if self.window < 1 {
            return fail("embed.window must be >= 1");
        }
        if self.negatives < 1 {
            return fail("embed.negatives must be >= 1");
        }
        if self.epochs < 1 {
            return fail("embed.epochs must be >= 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return fail("embed.initial_lr must be > 0");
        }
        if self.workers < 1 {
            return fail("workers must be >= 1");
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// d/d(dot) of log σ(dot) for a positive target, or of log σ(−dot) for a negative one.
fn coefficient(positive: bool, dot: f64) -> f64 {
    if positive {
        1.0 - sigmoid(dot)
    } else {
        -sigmoid(dot)
    }
}

/// Value and analytic gradient of one center/context objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub objective: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Dot product with four running sums.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// log σ(u·v) + Σ_n log σ(−u·n) and its gradient with respect to u, v and each n.
pub fn pair_objective(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let ln_sigmoid = |x: f64| -(1.0 + (-x).exp()).ln();
    let pos_dot = dot(center, context);
    let mut objective = ln_sigmoid(pos_dot);
    let g = coefficient(true, pos_dot);
    let mut grad_center: Vec<f64> = context.iter().map(|v| g * v).collect();
    let grad_context = center.iter().map(|u| g * u).collect();
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let d = dot(center, neg);
        objective += ln_sigmoid(-d);
        let g = coefficient(false, d);
        for (gc, n) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g * n;
        }
        grad_negs.push(center.iter().map(|u| g * u).collect());
    }
    PairGradient {
        objective,
        center: grad_center,
        context: grad_context,
        negatives: grad_negs,
    }
}

/// Flat parameter matrix with interior mutability, accessed by row.
trait Params {
    fn load(&self, start: usize, dst: &mut [f64]);
    fn store(&self, start: usize, src: &[f64]);
}

impl Params for [Cell<f64>] {
    fn load(&self, start: usize, dst: &mut [f64]) {
        let n = dst.len();
        for (d, c) in dst.iter_mut().zip(&self[start..start + n]) {
            *d = c.get();
        }
    }
    fn store(&self, start: usize, src: &[f64]) {
        for (c, v) in self[start..start + src.len()].iter().zip(src) {
            c.set(*v);
        }
    }
}

/// Shared parameters for multi-worker training: relaxed atomics, so updates
/// race benignly and results depend on scheduling.
struct AtomicParams(Vec<AtomicU64>);

impl AtomicParams {
    fn new(values: &[f64]) -> Self {
        AtomicParams(values.iter().map(|v| AtomicU64::new(v.to_bits())).collect())
    }

    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

impl Params for AtomicParams {
    fn load(&self, start: usize, dst: &mut [f64]) {
        let n = dst.len();
        for (d, a) in dst.iter_mut().zip(&self.0[start..start + n]) {
            *d = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }
    fn store(&self, start: usize, src: &[f64]) {
        for (a, v) in self.0[start..start + src.len()].iter().zip(src) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Trainer<'a> {
    dim: usize,
    window: usize,
    negatives: usize,
    noise: &'a WeightedIndex<f64>,
    vocab_of_node: &'a [Option<usize>],
}

impl Trainer<'_> {
    /// One SGD ascent step on (center, context) with freshly drawn negatives.
    ///
    /// Output rows are read before being written, and the center row is
    /// updated last, so for distinct targets this equals `lr` times the
    /// gradient from [`pair_objective`] evaluated at the old parameters.
    #[allow(clippy::too_many_arguments)]
    fn step<P: Params + ?Sized, R: Rng>(
        &self,
        input: &P,
        output: &P,
        center: usize,
        context: usize,
        lr: f64,
        rng: &mut R,
        scratch: &mut Scratch,
    ) {
        let dim = self.dim;
        input.load(center * dim, &mut scratch.center);
        scratch.grad.fill(0.0);
        let mut update = |target: usize, positive: bool| {
            let row = target * dim;
            output.load(row, &mut scratch.row);
            let g = lr * coefficient(positive, dot(&scratch.center, &scratch.row));
            for ((gr, o), c) in scratch.grad.iter_mut().zip(scratch.row.iter_mut()).zip(&scratch.center) {
                *gr += g * *o;
                *o += g * c;
            }
            output.store(row, &scratch.row);
        };
        update(context, true);
        for _ in 0..self.negatives {
            let neg = loop {
                let n = self.noise.sample(rng);
                if n != context {
                    break n;
                }
            };
            update(neg, false);
        }
        input.load(center * dim, &mut scratch.row);
        for (r, g) in scratch.row.iter_mut().zip(&scratch.grad) {
            *r += g;
        }
        input.store(center * dim, &scratch.row);
    }

    fn train_walk<P: Params + ?Sized, R: Rng>(
        &self,
        input: &P,
        output: &P,
        walk: &[u32],
        lr: f64,
        rng: &mut R,
        scratch: &mut Scratch,
    ) {
        let tokens: Vec<usize> = walk
            .iter()
            .filter_map(|&n| self.vocab_of_node[n as usize])
            .collect();
        for (pos, &center) in tokens.iter().enumerate() {
            let lo = pos.saturating_sub(self.window);
            let hi = (pos + self.window + 1).min(tokens.len());
            for (cpos, &context) in tokens.iter().enumerate().take(hi).skip(lo) {
                if cpos != pos {
                    self.step(input, output, center, context, lr, rng, scratch);
                }
            }
        }
    }
}

struct Scratch {
    center: Vec<f64>,
    row: Vec<f64>,
    grad: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            center: vec![0.0; dim],
            row: vec![0.0; dim],
            grad: vec![0.0; dim],
        }
    }
}

/// Learning rate after `done` of `total` tokens: linear decay to lr/10⁴.
fn learning_rate(initial: f64, done: usize, total: usize) -> f64 {
    let frac = done as f64 / total.max(1) as f64;
    (initial * (1.0 - frac)).max(initial * 1e-4)
}

/// Trains input vectors for every node that occurs in the corpus.
///
/// With `workers == 1` the result is a pure function of corpus and config.
pub fn train_embeddings(
    corpus: &WalkCorpus,
    config: &EmbedConfig,
    language: LanguageCode,
) -> Result<EmbeddingTable> {
    config.validate()?;
    let mut counts = vec![0u64; corpus.nodes().len()];
    for walk in corpus.walks() {
        for &n in walk {
            counts[n as usize] += 1;
        }
    }
    let mut vocab_of_node = vec![None; counts.len()];
    let mut vocab = Vec::new();
    for (node, &c) in counts.iter().enumerate() {
        if c > 0 {
            vocab_of_node[node] = Some(vocab.len());
            vocab.push(node);
        }
    }
    if vocab.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "vocabulary of size {} (need at least 2)",
            vocab.len()
        )));
    }
    let weights: Vec<f64> = vocab
        .iter()
        .map(|&n| (counts[n] as f64).powf(UNIGRAM_POWER))
        .collect();
    let noise = WeightedIndex::new(&weights).map_err(|e| Error::Internal(e.to_string()))?;

    let dim = config.dim;
    let mut init_rng = seed::rng(config.seed, &[b"embed-init"]);
    let half = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| init_rng.gen_range(-half..half))
        .collect();
    let mut output = vec![0.0; vocab.len() * dim];

    let trainer = Trainer {
        dim,
        window: config.window,
        negatives: config.negatives,
        noise: &noise,
        vocab_of_node: &vocab_of_node,
    };
    let walks = corpus.walks();
    let total_tokens = corpus.token_count() * config.epochs;

    if config.workers == 1 {
        let input_cells = Cell::from_mut(input.as_mut_slice()).as_slice_of_cells();
        let output_cells = Cell::from_mut(output.as_mut_slice()).as_slice_of_cells();
        let mut rng = seed::rng(config.seed, &[b"embed-train"]);
        let mut scratch = Scratch::new(dim);
        let mut done = 0;
        for _ in 0..config.epochs {
            for walk in walks {
                let lr = learning_rate(config.initial_lr, done, total_tokens);
                trainer.train_walk(input_cells, output_cells, walk, lr, &mut rng, &mut scratch);
                done += walk.len();
            }
        }
    } else {
        let shared_in = AtomicParams::new(&input);
        let shared_out = AtomicParams::new(&output);
        let done = AtomicUsize::new(0);
        let chunk = walks.len().div_ceil(config.workers).max(1);
        std::thread::scope(|s| {
            for (w, part) in walks.chunks(chunk).enumerate() {
                let (trainer, shared_in, shared_out, done) = (&trainer, &shared_in, &shared_out, &done);
                s.spawn(move || {
                    let mut rng = seed::rng(config.seed, &[b"embed-train", &(w as u64).to_le_bytes()]);
                    let mut scratch = Scratch::new(dim);
                    for _ in 0..config.epochs {
                        for walk in part {
                            let lr = learning_rate(
                                config.initial_lr,
                                done.load(Ordering::Relaxed),
                                total_tokens,
                            );
                            trainer.train_walk(shared_in, shared_out, walk, lr, &mut rng, &mut scratch);
                            done.fetch_add(walk.len(), Ordering::Relaxed);
                        }
                    }
                });
            }
        });
        input = shared_in.into_vec();
    }

    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("non-finite embedding component".into()));
    }
    let vectors: BTreeMap<_, _> = vocab
        .iter()
        .enumerate()
        .map(|(vi, &node)| {
            (
                corpus.nodes()[node].clone(),
                input[vi * dim..(vi + 1) * dim].to_vec(),
            )
        })
        .collect();
    EmbeddingTable::new(language, dim, vectors)
}
