//! Community assignments and persistent community labels.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Identifier of a community that persists across snapshots.
///
/// Equality, ordering and hashing use `value` only; `origin_snapshot`
/// records the time step at which the value was first issued.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CommunityLabel {
    value: u64,
    origin_snapshot: u32,
}

impl CommunityLabel {
    pub const fn new(value: u64, origin_snapshot: u32) -> Self {
        CommunityLabel {
            value,
            origin_snapshot,
        }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn origin_snapshot(self) -> u32 {
        self.origin_snapshot
    }
}

impl PartialEq for CommunityLabel {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Eq for CommunityLabel {}

impl Hash for CommunityLabel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.value.hash(state)
    }
}

impl PartialOrd for CommunityLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CommunityLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.value.cmp(&other.value)
    }
}

impl fmt::Display for CommunityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Issues fresh labels from a monotone counter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAllocator {
    next: u64,
}

impl LabelAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts issuing at `next`, e.g. after reloading a timeline.
    pub fn starting_at(next: u64) -> Self {
        LabelAllocator { next }
    }

    pub fn issue(&mut self, snapshot: u32) -> CommunityLabel {
        let label = CommunityLabel::new(self.next, snapshot);
        self.next += 1;
        label
    }

    pub fn peek_next(&self) -> u64 {
        self.next
    }
}

/// Assignment of every node of one graph (by internal index) to a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<CommunityLabel>,
}

impl Partition {
    pub fn new(assignment: Vec<CommunityLabel>) -> Self {
        Partition { assignment }
    }

    /// Labels given by raw values, all with origin snapshot 0.
    pub fn from_values(values: &[u64]) -> Self {
        Partition::new(values.iter().map(|&v| CommunityLabel::new(v, 0)).collect())
    }

    /// Every node in its own community with a freshly issued label.
    pub fn singletons(n: usize, labels: &mut LabelAllocator, snapshot: u32) -> Self {
        Partition::new((0..n).map(|_| labels.issue(snapshot)).collect())
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn label(&self, node: usize) -> CommunityLabel {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[CommunityLabel] {
        &self.assignment
    }

    /// Distinct labels in ascending order.
    pub fn live_labels(&self) -> Vec<CommunityLabel> {
        let set: BTreeSet<CommunityLabel> = self.assignment.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn community_count(&self) -> usize {
        self.live_labels().len()
    }

    /// Node count per label.
    pub fn sizes(&self) -> HashMap<CommunityLabel, usize> {
        let mut sizes = HashMap::new();
        for &l in &self.assignment {
            *sizes.entry(l).or_insert(0) += 1;
        }
        sizes
    }

    /// Dense community indices in ascending label order, plus the labels.
    pub(crate) fn to_dense(&self) -> (Vec<u32>, Vec<CommunityLabel>) {
        let labels = self.live_labels();
        let index: HashMap<CommunityLabel, u32> =
            labels.iter().enumerate().map(|(i, &l)| (l, i as u32)).collect();
        (self.assignment.iter().map(|l| index[l]).collect(), labels)
    }

    pub fn check_covers(&self, g: &Graph) -> Result<()> {
        if self.len() != g.node_count() {
            return Err(Error::PartitionMismatch {
                expected: g.node_count(),
                found: self.len(),
            });
        }
        Ok(())
    }

    /// True when both partitions group the nodes identically, whatever the
    /// label values.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let mut fwd = HashMap::new();
        let mut bwd = HashMap::new();
        self.assignment.iter().zip(&other.assignment).all(|(a, b)| {
            *fwd.entry(*a).or_insert(*b) == *b && *bwd.entry(*b).or_insert(*a) == *a
        })
    }

    /// Writes `node_id<TAB>label<TAB>origin_snapshot` lines in node order.
    pub fn write_tsv<W: Write>(&self, g: &Graph, mut out: W) -> std::io::Result<()> {
        for (node, l) in self.assignment.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", g.external_id(node), l.value, l.origin_snapshot)?;
        }
        Ok(())
    }

    /// Reads `node_id<TAB>label[<TAB>origin_snapshot]` lines. Every node of
    /// `g` must be listed exactly once and no unknown node may appear.
    pub fn read_tsv<R: BufRead>(g: &Graph, input: R) -> Result<Partition> {
        let mut assignment: Vec<Option<CommunityLabel>> = vec![None; g.node_count()];
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let (id, value, origin) = match fields.as_slice() {
                [id, v] => (*id, *v, "0"),
                [id, v, o] => (*id, *v, *o),
                _ => return Err(parse_err("expected node_id<TAB>label".into())),
            };
            let value: u64 = value
                .parse()
                .map_err(|_| parse_err(format!("bad label {value:?}")))?;
            let origin: u32 = origin
                .parse()
                .map_err(|_| parse_err(format!("bad origin snapshot {origin:?}")))?;
            let node = g
                .index_of(id)
                .ok_or_else(|| parse_err(format!("node {id:?} is not in the graph")))?;
            if assignment[node].replace(CommunityLabel::new(value, origin)).is_some() {
                return Err(parse_err(format!("node {id:?} listed twice")));
            }
        }
        let missing = assignment.iter().filter(|l| l.is_none()).count();
        if missing > 0 {
            return Err(Error::PartitionMismatch {
                expected: g.node_count(),
                found: g.node_count() - missing,
            });
        }
        Ok(Partition::new(assignment.into_iter().flatten().collect()))
    }

    /// Reads a partition file on its own. The returned graph has the listed
    /// nodes, in file order, and no edges.
    pub fn read_tsv_standalone<R: BufRead>(input: R) -> Result<(Graph, Partition)> {
        let text = std::io::read_to_string(input)?;
        let mut builder = crate::graph::GraphBuilder::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            builder.add_node(line.split('\t').next().unwrap_or_default());
        }
        let g = builder.build();
        let part = Partition::read_tsv(&g, text.as_bytes())?;
        Ok((g, part))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn labels_compare_by_value() {
        assert_eq!(CommunityLabel::new(4, 0), CommunityLabel::new(4, 3));
        assert!(CommunityLabel::new(2, 9) < CommunityLabel::new(3, 0));
    }

    #[test]
    fn allocator_is_monotone() {
        let mut a = LabelAllocator::new();
        let x = a.issue(0);
        let y = a.issue(1);
        assert!(x < y);
        assert_eq!(y.origin_snapshot(), 1);
        assert_eq!(a.peek_next(), 2);
    }

    #[test]
    fn live_labels_are_the_image() {
        let p = Partition::from_values(&[5, 2, 5, 7]);
        let values: Vec<u64> = p.live_labels().iter().map(|l| l.value()).collect();
        assert_eq!(values, vec![2, 5, 7]);
        let (dense, _) = p.to_dense();
        assert_eq!(dense, vec![1, 0, 1, 2]);
    }

    #[test]
    fn grouping_ignores_label_values() {
        let a = Partition::from_values(&[1, 1, 2]);
        let b = Partition::from_values(&[8, 8, 3]);
        let c = Partition::from_values(&[8, 3, 3]);
        assert!(a.same_grouping(&b));
        assert!(!a.same_grouping(&c));
    }

    #[test]
    fn tsv_round_trip() {
        let g = build_graph([("x", "y", 1.0), ("y", "z", 1.0)]).unwrap();
        let p = Partition::new(vec![
            CommunityLabel::new(3, 0),
            CommunityLabel::new(3, 0),
            CommunityLabel::new(11, 2),
        ]);
        let mut buf = Vec::new();
        p.write_tsv(&g, &mut buf).unwrap();
        let q = Partition::read_tsv(&g, &buf[..]).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.label(2).origin_snapshot(), 2);
    }

    #[test]
    fn tsv_rejects_incomplete_or_unknown() {
        let g = build_graph([("x", "y", 1.0)]).unwrap();
        assert!(Partition::read_tsv(&g, "x\t1\n".as_bytes()).is_err());
        assert!(Partition::read_tsv(&g, "x\t1\ny\t1\nq\t2\n".as_bytes()).is_err());
        assert!(Partition::read_tsv(&g, "x\t1\nx\t1\n".as_bytes()).is_err());
        assert!(Partition::read_tsv(&g, "x\t1\ny\t2\n".as_bytes()).is_ok());
    }
}
