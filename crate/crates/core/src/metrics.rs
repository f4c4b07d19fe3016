//! Comparing the partitions of two consecutive snapshots.
//!
//! Mutual information is measured over the nodes present in both snapshots,
//! in nats. Matching uses the strict two-sided overlap test with community
//! sizes taken on each partition's own full node set.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::louvain::modularity;
use crate::partition::{CommunityLabel, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub r: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { r: 0.51 }
    }
}

impl MatchConfig {
    pub fn new(r: f64) -> Result<Self> {
        let cfg = MatchConfig { r };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.5) {
            return Err(Error::InvalidParameter(format!("r must exceed 0.5, got {}", self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingPair {
    pub prev: u64,
    pub next: u64,
    pub intersection: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mutual_information_nats: f64,
    pub matching_pairs: Vec<MatchingPair>,
    pub matching_count: usize,
    pub modularity_next: f64,
    pub node_intersection_size: usize,
}

/// Nodes present in both graphs as `(index in a, index in b)`, in `a` order.
pub fn common_nodes(a: &Graph, b: &Graph) -> Vec<(usize, usize)> {
    a.external_ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| b.index_of(id).map(|j| (i, j)))
        .collect()
}

fn check_common(a: &Partition, b: &Partition, common: &[(usize, usize)]) -> Result<()> {
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    if common.iter().any(|&(i, j)| i >= a.len() || j >= b.len()) {
        return Err(Error::InvalidParameter("common node index outside a partition".into()));
    }
    Ok(())
}

fn sorted_counts<K: Ord + Copy>(counts: HashMap<K, usize>) -> Vec<(K, usize)> {
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_unstable_by_key(|&(k, _)| k);
    v
}

/// Mutual information (nats) between `a` and `b` restricted to `common`.
pub fn mutual_information(a: &Partition, b: &Partition, common: &[(usize, usize)]) -> Result<f64> {
    check_common(a, b, common)?;
    let mut joint: HashMap<(CommunityLabel, CommunityLabel), usize> = HashMap::new();
    let mut left: HashMap<CommunityLabel, usize> = HashMap::new();
    let mut right: HashMap<CommunityLabel, usize> = HashMap::new();
    for &(i, j) in common {
        let (la, lb) = (a.label(i), b.label(j));
        *joint.entry((la, lb)).or_insert(0) += 1;
        *left.entry(la).or_insert(0) += 1;
        *right.entry(lb).or_insert(0) += 1;
    }
    let total = common.len() as f64;
    let mi: f64 = sorted_counts(joint)
        .into_iter()
        .map(|((la, lb), nij)| {
            let nij = nij as f64;
            let (ni, nj) = (left[&la] as f64, right[&lb] as f64);
            nij / total * (nij * total / (ni * nj)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Shannon entropy (nats) of `part` restricted to `nodes`.
pub fn entropy(part: &Partition, nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<CommunityLabel, usize> = HashMap::new();
    for &i in nodes {
        *counts.entry(part.label(i)).or_insert(0) += 1;
    }
    let total = nodes.len() as f64;
    let h: f64 = sorted_counts(counts)
        .into_iter()
        .map(|(_, c)| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Pairs `(C, C')` with `|C ∩ C'| > r|C|` and `|C ∩ C'| > r|C'|`, sorted by
/// previous label. Intersections run over `common`; sizes over the full
/// partitions.
pub fn matching_communities(
    a: &Partition,
    b: &Partition,
    common: &[(usize, usize)],
    cfg: &MatchConfig,
) -> Result<Vec<MatchingPair>> {
    cfg.validate()?;
    if common.iter().any(|&(i, j)| i >= a.len() || j >= b.len()) {
        return Err(Error::InvalidParameter("common node index outside a partition".into()));
    }
    let size_a = a.sizes();
    let size_b = b.sizes();
    let mut overlap: HashMap<(CommunityLabel, CommunityLabel), usize> = HashMap::new();
    for &(i, j) in common {
        *overlap.entry((a.label(i), b.label(j))).or_insert(0) += 1;
    }
    Ok(sorted_counts(overlap)
        .into_iter()
        .filter(|&((la, lb), n)| {
            let n = n as f64;
            n > cfg.r * size_a[&la] as f64 && n > cfg.r * size_b[&lb] as f64
        })
        .map(|((la, lb), n)| MatchingPair {
            prev: la.value(),
            next: lb.value(),
            intersection: n,
        })
        .collect())
}

/// Mutual information, matching communities and the modularity of the new
/// partition for one pair of consecutive snapshots.
pub fn compare(
    g_prev: &Graph,
    part_prev: &Partition,
    g_next: &Graph,
    part_next: &Partition,
    cfg: &MatchConfig,
) -> Result<ComparisonReport> {
    part_prev.check_covers(g_prev)?;
    part_next.check_covers(g_next)?;
    let common = common_nodes(g_prev, g_next);
    let mutual_information_nats = mutual_information(part_prev, part_next, &common)?;
    let matching_pairs = matching_communities(part_prev, part_next, &common, cfg)?;
    Ok(ComparisonReport {
        mutual_information_nats,
        matching_count: matching_pairs.len(),
        matching_pairs,
        modularity_next: modularity(g_next, part_next)?,
        node_intersection_size: common.len(),
    })
}
