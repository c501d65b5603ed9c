use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, LinkSet};
use crate::seed;

/// Transition rule for the walker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkBias {
    /// Next node drawn uniformly from the current node's neighbors.
    Uniform,
    /// Second-order walk: return parameter `p`, in-out parameter `q`.
    Node2Vec { p: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub bias: WalkBias,
    /// Follow links in both directions instead of out-links only.
    pub treat_undirected: bool,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 40,
            bias: WalkBias::Uniform,
            treat_undirected: false,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 {
            return Err(Error::Config("walk.walks_per_node must be >= 1".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk.walk_length must be >= 2".into()));
        }
        if let WalkBias::Node2Vec { p, q } = self.bias {
            if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
                return Err(Error::Config("walk.p and walk.q must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Random walks stored as indexes into `nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    nodes: Vec<EntityId>,
    walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn new(nodes: Vec<EntityId>, walks: Vec<Vec<u32>>) -> Self {
        WalkCorpus { nodes, walks }
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn walks(&self) -> &[Vec<u32>] {
        &self.walks
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    pub fn walk_ids(&self, i: usize) -> Vec<&EntityId> {
        self.walks[i].iter().map(|&n| &self.nodes[n as usize]).collect()
    }
}

/// Adjacency the walker traverses: out-links, or out- and in-links merged.
pub struct Walker<'a> {
    links: &'a LinkSet,
    adjacency: Vec<Vec<usize>>,
    config: &'a WalkConfig,
}

impl<'a> Walker<'a> {
    pub fn new(links: &'a LinkSet, config: &'a WalkConfig) -> Self {
        let adjacency = (0..links.node_count())
            .map(|i| {
                let mut adj = links.out_indices(i).to_vec();
                if config.treat_undirected {
                    adj.extend_from_slice(links.in_indices(i));
                    adj.sort_unstable();
                    adj.dedup();
                }
                adj
            })
            .collect();
        Walker {
            links,
            adjacency,
            config,
        }
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// One walk from `start`; stops early at a node without neighbors.
    pub fn walk<R: Rng>(&self, start: usize, rng: &mut R) -> Vec<u32> {
        let mut walk = Vec::with_capacity(self.config.walk_length);
        walk.push(start as u32);
        let mut prev: Option<usize> = None;
        let mut cur = start;
        while walk.len() < self.config.walk_length {
            let Some(next) = self.step(prev, cur, rng) else {
                break;
            };
            walk.push(next as u32);
            prev = Some(cur);
            cur = next;
        }
        walk
    }

    /// Draws the successor of `cur`, given the node visited before it.
    pub fn step<R: Rng>(&self, prev: Option<usize>, cur: usize, rng: &mut R) -> Option<usize> {
        let nbrs = &self.adjacency[cur];
        if nbrs.is_empty() {
            return None;
        }
        match (self.config.bias, prev) {
            (WalkBias::Node2Vec { p, q }, Some(prev)) => {
                let weight = |x: usize| {
                    if x == prev {
                        1.0 / p
                    } else if self.adjacency[prev].binary_search(&x).is_ok() {
                        1.0
                    } else {
                        1.0 / q
                    }
                };
                let total: f64 = nbrs.iter().map(|&x| weight(x)).sum();
                let mut r = rng.gen::<f64>() * total;
                for &x in nbrs {
                    r -= weight(x);
                    if r < 0.0 {
                        return Some(x);
                    }
                }
                nbrs.last().copied()
            }
            _ => Some(nbrs[rng.gen_range(0..nbrs.len())]),
        }
    }

    /// Walk starting from an entity id, or `None` if it is not in the link set.
    pub fn walk_from<R: Rng>(&self, start: &EntityId, rng: &mut R) -> Option<Vec<&EntityId>> {
        let idx = self.links.node_index(start)?;
        Some(
            self.walk(idx, rng)
                .into_iter()
                .map(|n| self.links.node(n as usize))
                .collect(),
        )
    }
}

/// Generates `walks_per_node` walks from every node that has a neighbor.
///
/// Each start node owns a random stream derived from the seed and its id, so
/// the corpus does not depend on the number of rayon workers. Walks are
/// emitted pass by pass, with the node order of every pass shuffled.
pub fn generate_walks(links: &LinkSet, config: &WalkConfig) -> Result<WalkCorpus> {
    config.validate()?;
    let walker = Walker::new(links, config);
    let starts: Vec<usize> = (0..links.node_count())
        .filter(|&i| !walker.neighbors(i).is_empty())
        .collect();

    let per_node: Vec<Vec<Vec<u32>>> = starts
        .par_iter()
        .map(|&start| {
            let mut rng = seed::rng(config.seed, &[b"walk", links.node(start).as_str().as_bytes()]);
            (0..config.walks_per_node)
                .map(|_| walker.walk(start, &mut rng))
                .collect()
        })
        .collect();

    let mut order_rng = seed::rng(config.seed, &[b"walk-order"]);
    let mut walks = Vec::with_capacity(starts.len() * config.walks_per_node);
    let mut per_node: Vec<std::vec::IntoIter<Vec<u32>>> = per_node.into_iter().map(Vec::into_iter).collect();
    for _ in 0..config.walks_per_node {
        let mut order: Vec<usize> = (0..starts.len()).collect();
        order.shuffle(&mut order_rng);
        walks.extend(order.into_iter().map(|i| per_node[i].next().expect("one walk per pass")));
    }
    Ok(WalkCorpus::new(links.nodes().to_vec(), walks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::LanguageCode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn links(pairs: &[(&str, &str)]) -> LinkSet {
        LinkSet::from_edges(
            LanguageCode::new("de").unwrap(),
            pairs.iter().map(|(s, t)| (id(s), id(t))),
        )
    }

    #[test]
    fn path_graph_walk_is_forced() {
        let ls = links(&[("a", "b"), ("b", "a")]);
        let cfg = WalkConfig {
            walk_length: 4,
            ..WalkConfig::default()
        };
        let walker = Walker::new(&ls, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = walker.walk_from(&id("a"), &mut rng).unwrap();
        assert_eq!(w, vec![&id("a"), &id("b"), &id("a"), &id("b")]);
    }

    #[test]
    fn sink_walk_has_length_one() {
        let ls = links(&[("a", "s")]);
        let cfg = WalkConfig::default();
        let walker = Walker::new(&ls, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(walker.walk_from(&id("s"), &mut rng).unwrap(), vec![&id("s")]);
        // a -> s then stops
        assert_eq!(walker.walk_from(&id("a"), &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn corpus_size_counts_nodes_with_neighbors() {
        let ls = links(&[("a", "b"), ("b", "c"), ("c", "a"), ("c", "sink")]);
        let cfg = WalkConfig {
            walks_per_node: 3,
            walk_length: 5,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&ls, &cfg).unwrap();
        assert_eq!(corpus.len(), 3 * 3);
        for walk in corpus.walks() {
            assert!(walk.len() <= 5);
            for pair in walk.windows(2) {
                assert!(ls.has_edge_idx(pair[0] as usize, pair[1] as usize));
            }
        }
    }

    #[test]
    fn undirected_traversal_uses_reverse_edges() {
        let ls = links(&[("a", "s")]);
        let cfg = WalkConfig {
            walks_per_node: 2,
            walk_length: 3,
            treat_undirected: true,
            ..WalkConfig::default()
        };
        let corpus = generate_walks(&ls, &cfg).unwrap();
        assert_eq!(corpus.len(), 4);
        assert!(corpus.walks().iter().all(|w| w.len() == 3));
    }

    #[test]
    fn deterministic_regardless_of_thread_count() {
        let pairs: Vec<(String, String)> = (0..30)
            .flat_map(|i| [(format!("n{i}"), format!("n{}", (i + 1) % 30)), (format!("n{i}"), format!("n{}", (i * 7) % 30))])
            .collect();
        let ls = LinkSet::from_edges(
            LanguageCode::new("de").unwrap(),
            pairs.iter().map(|(s, t)| (id(s), id(t))),
        );
        let cfg = WalkConfig {
            bias: WalkBias::Node2Vec { p: 4.0, q: 0.5 },
            seed: 5,
            ..WalkConfig::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_walks(&ls, &cfg).unwrap());
        let b = four.install(|| generate_walks(&ls, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn node2vec_return_parameter_biases_backtracking() {
        // Star around c: from c (having arrived from a), low p makes returning to a likely.
        let ls = links(&[("a", "c"), ("c", "a"), ("c", "x"), ("c", "y"), ("c", "z")]);
        let cfg = WalkConfig {
            bias: WalkBias::Node2Vec { p: 0.01, q: 1.0 },
            ..WalkConfig::default()
        };
        let walker = Walker::new(&ls, &cfg);
        let (a, c) = (ls.node_index(&id("a")).unwrap(), ls.node_index(&id("c")).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let back = (0..1000)
            .filter(|_| walker.step(Some(a), c, &mut rng) == Some(a))
            .count();
        assert!(back > 900, "{back}");
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig { walk_length: 1, ..WalkConfig::default() }.validate().is_err());
        assert!(WalkConfig { walks_per_node: 0, ..WalkConfig::default() }.validate().is_err());
        assert!(WalkConfig {
            bias: WalkBias::Node2Vec { p: 0.0, q: 1.0 },
            ..WalkConfig::default()
        }
        .validate()
        .is_err());
    }
}
