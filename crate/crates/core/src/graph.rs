//! Undirected weighted graph snapshots stored in compressed adjacency form.
//!
//! Nodes carry an external identifier (whatever the source data used) and a
//! dense internal index in `[0, n)`. All algorithms work on internal indices.
//!
//! Weight bookkeeping follows the usual Louvain aggregation convention: a
//! self-loop of weight `w` adds `2w` to the strength of its node and `2w` to
//! `2m`. Under this rule collapsing a community into one node preserves the
//! modularity of every coarser partition.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::partition::{CommunityLabel, Partition};

/// An immutable undirected weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    ids: Vec<String>,
    lookup: HashMap<String, u32>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    self_loops: Vec<f64>,
    strength: Vec<f64>,
    total_weight_2m: f64,
}

impl Graph {
    pub fn empty() -> Self {
        Self::from_sorted_parts(Vec::new(), Vec::new(), vec![0], Vec::new(), Vec::new())
    }

    /// Builds the adjacency from a node list and undirected edges given by
    /// internal index. Duplicate edges (in either orientation) are summed and
    /// `(u, u, w)` becomes a self-loop.
    pub(crate) fn from_edges(ids: Vec<String>, edges: Vec<(u32, u32, f64)>) -> Self {
        let n = ids.len();
        let mut self_loops = vec![0.0; n];
        let mut half: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len() * 2);
        for (u, v, w) in edges {
            if u == v {
                self_loops[u as usize] += w;
            } else {
                half.push((u, v, w));
                half.push((v, u, w));
            }
        }
        Self::from_half_edges(ids, half, self_loops)
    }

    /// `half` must contain both orientations of every edge.
    fn from_half_edges(
        ids: Vec<String>,
        mut half: Vec<(u32, u32, f64)>,
        self_loops: Vec<f64>,
    ) -> Self {
        let n = ids.len();
        half.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = vec![0usize; n + 1];
        let mut neighbors = Vec::with_capacity(half.len());
        let mut weights: Vec<f64> = Vec::with_capacity(half.len());
        let mut last: Option<(u32, u32)> = None;
        for (u, v, w) in half {
            if last == Some((u, v)) {
                *weights.last_mut().expect("merged edge has a predecessor") += w;
                continue;
            }
            last = Some((u, v));
            offsets[u as usize + 1] += 1;
            neighbors.push(v);
            weights.push(w);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self::from_sorted_parts(ids, self_loops, offsets, neighbors, weights)
    }

    fn from_sorted_parts(
        ids: Vec<String>,
        self_loops: Vec<f64>,
        offsets: Vec<usize>,
        neighbors: Vec<u32>,
        weights: Vec<f64>,
    ) -> Self {
        let n = ids.len();
        let lookup = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        let strength: Vec<f64> = (0..n)
            .map(|u| {
                weights[offsets[u]..offsets[u + 1]].iter().sum::<f64>() + 2.0 * self_loops[u]
            })
            .collect();
        let total_weight_2m = strength.iter().sum();
        Graph {
            ids,
            lookup,
            offsets,
            neighbors,
            weights,
            self_loops,
            strength,
            total_weight_2m,
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Number of distinct undirected non-loop edges.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn external_id(&self, node: usize) -> &str {
        &self.ids[node]
    }

    pub fn external_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).map(|&i| i as usize)
    }

    /// Neighbors of `node` with edge weights, excluding the self-loop.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.neighbors[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&v, &w)| (v as usize, w))
    }

    /// Number of distinct neighbors, self excluded.
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn self_loop(&self, node: usize) -> f64 {
        self.self_loops[node]
    }

    /// Weighted degree `k_i`, self-loops counted twice.
    pub fn strength(&self, node: usize) -> f64 {
        self.strength[node]
    }

    pub fn total_weight_2m(&self) -> f64 {
        self.total_weight_2m
    }

    /// Undirected edges as `(u, v, w)` with `u <= v`, self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            let lp = self.self_loops[u];
            let looped = (lp != 0.0).then_some((u, u, lp));
            looped
                .into_iter()
                .chain(self.neighbors(u).filter(move |&(v, _)| u < v).map(move |(v, w)| (u, v, w)))
        })
    }

    /// Collapses every community of `comm` (dense indices in `[0, count)`)
    /// into one node. Internal weight becomes a self-loop, crossing weight is
    /// summed per community pair. Node `c` of the result gets id `ids[c]`.
    pub(crate) fn collapse(&self, comm: &[u32], ids: Vec<String>) -> Graph {
        let count = ids.len();
        debug_assert_eq!(comm.len(), self.node_count());
        let mut self_loops = vec![0.0; count];
        let mut half = Vec::new();
        for u in 0..self.node_count() {
            let cu = comm[u];
            self_loops[cu as usize] += self.self_loops[u];
            for (v, w) in self.neighbors(u) {
                let cv = comm[v];
                if cu == cv {
                    // each internal edge is visited from both ends
                    self_loops[cu as usize] += w * 0.5;
                } else {
                    half.push((cu, cv, w));
                }
            }
        }
        Self::from_half_edges(ids, half, self_loops)
    }

    /// Subgraph induced by the nodes with `keep[i]`, preserving relative
    /// order. Isolated survivors stay in the node set.
    pub fn induced(&self, keep: &[bool]) -> Graph {
        let mut remap = vec![u32::MAX; self.node_count()];
        let mut ids = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            remap[i] = ids.len() as u32;
            ids.push(self.ids[i].clone());
        }
        let edges = self
            .edges()
            .filter(|&(u, v, _)| keep[u] && keep[v])
            .map(|(u, v, w)| (remap[u], remap[v], w))
            .collect();
        Graph::from_edges(ids, edges)
    }

    /// Writes the edge-list text format. Nodes without any edge are written
    /// as a single-column line so the node set survives a round trip.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in 0..self.node_count() {
            if self.degree(u) == 0 && self.self_loops[u] == 0.0 {
                writeln!(out, "{}", self.ids[u])?;
            }
        }
        for (u, v, w) in self.edges() {
            writeln!(out, "{}\t{}\t{}", self.ids[u], self.ids[v], w)?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Graph> {
        let mut builder = GraphBuilder::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [u] => {
                    builder.add_node(u);
                }
                [u, v] => builder.add_edge(u, v, 1.0)?,
                [u, v, w] => {
                    let w: f64 = w.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad weight {w:?}"),
                    })?;
                    builder.add_edge(u, v, w)?
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected 1 to 3 tab-separated fields, got {}", fields.len()),
                    })
                }
            }
        }
        Ok(builder.build())
    }
}

/// Incremental construction from external identifiers.
///
/// Identifiers receive internal indices in first-seen order.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    ids: Vec<String>,
    lookup: HashMap<String, u32>,
    edges: Vec<(u32, u32, f64)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.lookup.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), i);
        i
    }

    pub fn add_edge(&mut self, u: &str, v: &str, w: f64) -> Result<()> {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::NegativeWeight {
                u: u.to_owned(),
                v: v.to_owned(),
                weight: w,
            });
        }
        let a = self.add_node(u);
        let b = self.add_node(v);
        self.edges.push((a, b, w));
        Ok(())
    }

    pub fn build(self) -> Graph {
        Graph::from_edges(self.ids, self.edges)
    }
}

/// Builds a graph from `(u, v, w)` triples over external identifiers.
pub fn build_graph<I, S>(edges: I) -> Result<Graph>
where
    I: IntoIterator<Item = (S, S, f64)>,
    S: AsRef<str>,
{
    let mut builder = GraphBuilder::new();
    for (u, v, w) in edges {
        builder.add_edge(u.as_ref(), v.as_ref(), w)?;
    }
    Ok(builder.build())
}

/// Community graph of `part`: one node per live label, in ascending label
/// order, with external id equal to the label value.
pub fn aggregate_by_partition(g: &Graph, part: &Partition) -> Result<Graph> {
    part.check_covers(g)?;
    let labels: Vec<CommunityLabel> = part.live_labels();
    let index: HashMap<CommunityLabel, u32> =
        labels.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
    let comm: Vec<u32> = part.assignment().iter().map(|l| index[l]).collect();
    let ids = labels.iter().map(|l| l.value().to_string()).collect();
    Ok(g.collapse(&comm, ids))
}
