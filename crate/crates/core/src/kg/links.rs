use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::{EntityId, LanguageCode};
use crate::tsv;

/// The directed link set of one language edition with in/out adjacency.
///
/// Nodes are stored in lexicographic id order and adjacency lists are sorted
/// node indexes, so every query is independent of input line order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    language: LanguageCode,
    nodes: Vec<EntityId>,
    index: HashMap<EntityId, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_count: usize,
    self_loops_dropped: usize,
    duplicates_dropped: usize,
}

impl LinkSet {
    pub fn from_edges<I>(language: LanguageCode, edges: I) -> Self
    where
        I: IntoIterator<Item = (EntityId, EntityId)>,
    {
        let mut unique = BTreeSet::new();
        let mut self_loops = 0;
        let mut duplicates = 0;
        for (s, t) in edges {
            if s == t {
                self_loops += 1;
            } else if !unique.insert((s, t)) {
                duplicates += 1;
            }
        }

        let node_set: BTreeSet<&EntityId> = unique.iter().flat_map(|(s, t)| [s, t]).collect();
        let nodes: Vec<EntityId> = node_set.into_iter().cloned().collect();
        let index: HashMap<EntityId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        for (s, t) in &unique {
            let (si, ti) = (index[s], index[t]);
            out_adj[si].push(ti);
            in_adj[ti].push(si);
        }
        // `unique` iterates sorted by (source, target), so out lists are
        // already sorted; in lists need it.
        for list in &mut in_adj {
            list.sort_unstable();
        }

        if self_loops > 0 {
            log::info!("links[{language}]: dropped {self_loops} self-loops");
        }
        LinkSet {
            language,
            nodes,
            index,
            out_adj,
            in_adj,
            edge_count: unique.len(),
            self_loops_dropped: self_loops,
            duplicates_dropped: duplicates,
        }
    }

    /// Loads a `source<TAB>target` file.
    pub fn load(path: &Path, language: LanguageCode) -> Result<Self> {
        let mut edges = Vec::new();
        tsv::for_each_record(path, |rec| {
            if rec.fields.len() != 2 {
                return Err(Error::parse(
                    path,
                    rec.line,
                    format!("expected 2 fields, found {}", rec.fields.len()),
                ));
            }
            let s = EntityId::new(rec.fields[0])
                .map_err(|m| Error::parse(path, rec.line, m))?;
            let t = EntityId::new(rec.fields[1])
                .map_err(|m| Error::parse(path, rec.line, m))?;
            edges.push((s, t));
            Ok(())
        })?;
        Ok(LinkSet::from_edges(language, edges))
    }

    pub fn language(&self) -> &LanguageCode {
        &self.language
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn self_loops_dropped(&self) -> usize {
        self.self_loops_dropped
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Number of distinct nodes touched by at least one edge.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &EntityId {
        &self.nodes[idx]
    }

    pub fn node_index(&self, id: &EntityId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn out_indices(&self, idx: usize) -> &[usize] {
        &self.out_adj[idx]
    }

    pub fn in_indices(&self, idx: usize) -> &[usize] {
        &self.in_adj[idx]
    }

    pub fn has_edge_idx(&self, from: usize, to: usize) -> bool {
        self.out_adj[from].binary_search(&to).is_ok()
    }

    pub fn has_edge(&self, from: &EntityId, to: &EntityId) -> bool {
        match (self.node_index(from), self.node_index(to)) {
            (Some(f), Some(t)) => self.has_edge_idx(f, t),
            _ => false,
        }
    }

    pub fn out_neighbors(&self, id: &EntityId) -> Vec<&EntityId> {
        self.resolve(id, &self.out_adj)
    }

    pub fn in_neighbors(&self, id: &EntityId) -> Vec<&EntityId> {
        self.resolve(id, &self.in_adj)
    }

    fn resolve<'a>(&'a self, id: &EntityId, adj: &'a [Vec<usize>]) -> Vec<&'a EntityId> {
        match self.node_index(id) {
            Some(i) => adj[i].iter().map(|&j| &self.nodes[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn in_degree(&self, id: &EntityId) -> usize {
        self.node_index(id).map_or(0, |i| self.in_adj[i].len())
    }

    pub fn out_degree(&self, id: &EntityId) -> usize {
        self.node_index(id).map_or(0, |i| self.out_adj[i].len())
    }

    /// |in(a) ∩ in(b)|
    pub fn shared_in(&self, a: &EntityId, b: &EntityId) -> usize {
        self.shared(a, b, &self.in_adj)
    }

    /// |out(a) ∩ out(b)|
    pub fn shared_out(&self, a: &EntityId, b: &EntityId) -> usize {
        self.shared(a, b, &self.out_adj)
    }

    fn shared(&self, a: &EntityId, b: &EntityId, adj: &[Vec<usize>]) -> usize {
        match (self.node_index(a), self.node_index(b)) {
            (Some(i), Some(j)) => sorted_intersection_len(&adj[i], &adj[j]),
            _ => 0,
        }
    }

    /// All edges in (source, target) id order.
    pub fn edges(&self) -> impl Iterator<Item = (&EntityId, &EntityId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(move |(s, ts)| ts.iter().map(move |&t| (&self.nodes[s], &self.nodes[t])))
    }
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
