use std::collections::HashMap;

use crate::error::Result;
use crate::graph::Graph;
use crate::partition::{CommunityLabel, Partition};

/// Newman modularity of `part` on `g`. An edgeless graph has modularity 0.
pub fn modularity(g: &Graph, part: &Partition) -> Result<f64> {
    part.check_covers(g)?;
    let (comm, labels) = part.to_dense();
    Ok(modularity_dense(g, &comm, labels.len()))
}

/// Modularity for dense community indices in `[0, count)`.
pub(crate) fn modularity_dense(g: &Graph, comm: &[u32], count: usize) -> f64 {
    let m2 = g.total_weight_2m();
    if m2 == 0.0 {
        return 0.0;
    }
    let mut internal = vec![0.0; count];
    let mut total = vec![0.0; count];
    for u in 0..g.node_count() {
        let c = comm[u] as usize;
        total[c] += g.strength(u);
        internal[c] += 2.0 * g.self_loop(u);
        for (v, w) in g.neighbors(u) {
            if comm[v] as usize == c {
                internal[c] += w;
            }
        }
    }
    internal
        .iter()
        .zip(&total)
        .map(|(&sin, &stot)| sin / m2 - (stot / m2) * (stot / m2))
        .sum()
}

/// Total strength per community, maintained alongside a partition so that
/// move gains cost one neighbor scan.
#[derive(Debug, Clone)]
pub struct CommunitySums {
    total: HashMap<CommunityLabel, f64>,
}

impl CommunitySums {
    pub fn new(g: &Graph, part: &Partition) -> Result<Self> {
        part.check_covers(g)?;
        let mut total = HashMap::new();
        for u in 0..g.node_count() {
            *total.entry(part.label(u)).or_insert(0.0) += g.strength(u);
        }
        Ok(CommunitySums { total })
    }

    pub fn total(&self, label: CommunityLabel) -> f64 {
        self.total.get(&label).copied().unwrap_or(0.0)
    }

    /// Updates the sums after `node` moved from `from` to `to`.
    pub fn apply_move(&mut self, g: &Graph, node: usize, from: CommunityLabel, to: CommunityLabel) {
        let k = g.strength(node);
        *self.total.entry(from).or_insert(0.0) -= k;
        *self.total.entry(to).or_insert(0.0) += k;
    }
}

/// Change in modularity when `node` leaves its community for `target`.
pub fn modularity_gain(
    g: &Graph,
    part: &Partition,
    node: usize,
    target: CommunityLabel,
    sums: &CommunitySums,
) -> f64 {
    let current = part.label(node);
    if current == target {
        return 0.0;
    }
    let k = g.strength(node);
    debug_assert!(
        sums.total(current) + 1e-9 >= k,
        "community sums are stale for node {node}"
    );
    let mut to_target = 0.0;
    let mut to_current = 0.0;
    for (v, w) in g.neighbors(node) {
        let l = part.label(v);
        if l == target {
            to_target += w;
        } else if l == current {
            to_current += w;
        }
    }
    move_delta(
        g.total_weight_2m(),
        k,
        to_target,
        to_current,
        sums.total(target),
        sums.total(current),
    )
}

/// ΔQ of moving a node of strength `k` from community `d` to `c`, given its
/// edge weight into each (self-loop excluded) and both totals before the move.
#[inline]
pub(crate) fn move_delta(m2: f64, k: f64, k_to_c: f64, k_to_d: f64, tot_c: f64, tot_d: f64) -> f64 {
    if m2 == 0.0 {
        return 0.0;
    }
    2.0 * (k_to_c - k_to_d) / m2 - 2.0 * k * (tot_c - tot_d + k) / (m2 * m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn triangle() -> Graph {
        build_graph([("a", "b", 1.0), ("b", "c", 1.0), ("c", "a", 1.0)]).unwrap()
    }

    #[test]
    fn one_community_is_zero() {
        let g = triangle();
        let q = modularity(&g, &Partition::from_values(&[1, 1, 1])).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn triangle_singletons() {
        let q = modularity(&triangle(), &Partition::from_values(&[0, 1, 2])).unwrap();
        assert!((q + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_disjoint_triangles() {
        let g = build_graph([
            ("a", "b", 1.0),
            ("b", "c", 1.0),
            ("c", "a", 1.0),
            ("d", "e", 1.0),
            ("e", "f", 1.0),
            ("f", "d", 1.0),
        ])
        .unwrap();
        let q = modularity(&g, &Partition::from_values(&[0, 0, 0, 1, 1, 1])).unwrap();
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_graph_is_zero() {
        let g = Graph::empty();
        assert_eq!(modularity(&g, &Partition::new(vec![])).unwrap(), 0.0);
    }

    #[test]
    fn gain_into_own_community_is_zero() {
        let g = triangle();
        let part = Partition::from_values(&[0, 0, 1]);
        let sums = CommunitySums::new(&g, &part).unwrap();
        assert_eq!(modularity_gain(&g, &part, 0, part.label(0), &sums), 0.0);
    }

    #[test]
    fn isolated_node_gains_nothing() {
        let mut b = crate::graph::GraphBuilder::new();
        b.add_edge("a", "b", 1.0).unwrap();
        b.add_node("z");
        let g = b.build();
        let part = Partition::from_values(&[0, 0, 1]);
        let sums = CommunitySums::new(&g, &part).unwrap();
        let gain = modularity_gain(&g, &part, 2, part.label(0), &sums);
        assert_eq!(gain, 0.0);
    }

    #[test]
    fn gain_matches_recompute() {
        let g = triangle();
        let part = Partition::from_values(&[0, 0, 1]);
        let sums = CommunitySums::new(&g, &part).unwrap();
        let gain = modularity_gain(&g, &part, 2, part.label(0), &sums);
        let before = modularity(&g, &part).unwrap();
        let after = modularity(&g, &Partition::from_values(&[0, 0, 0])).unwrap();
        assert!((gain - (after - before)).abs() < 1e-12);
    }
}
