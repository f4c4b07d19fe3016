use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::{CommunityLabel, LabelAllocator, Partition};
use crate::seed::derive_seed;

const FIXED_STREAM: u64 = 0xF1;
const PREF_STREAM: u64 = 0xF2;

/// Everything the dynamic step needs from the previous snapshot.
///
/// Node sets are internal indices of the next graph.
#[derive(Debug, Clone)]
pub struct DynamicContext {
    previous: Vec<Option<CommunityLabel>>,
    prev_labels: HashSet<CommunityLabel>,
    remaining: Vec<usize>,
    fixed: Vec<usize>,
    pref: Vec<usize>,
    p: f64,
    q: f64,
    next_ids_fingerprint: u64,
}

impl DynamicContext {
    /// Matches the two snapshots by external id and samples the fixed and
    /// preferential sets from `seed`.
    pub fn build(
        g_prev: &Graph,
        prev_partition: &Partition,
        g_next: &Graph,
        p: f64,
        q: f64,
        seed: u64,
    ) -> Result<Self> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        let mut ctx = Self::with_sets(g_prev, prev_partition, g_next, Vec::new(), Vec::new())?;
        let all: Vec<usize> = (0..g_next.node_count()).collect();
        ctx.fixed = sample_fixed_set(&ctx.remaining, p, derive_seed(seed, FIXED_STREAM));
        ctx.pref = sample_pref_set(&all, q, derive_seed(seed, PREF_STREAM));
        ctx.p = p;
        ctx.q = q;
        Ok(ctx)
    }

    /// Uses explicit fixed and preferential sets; `p` and `q` are set to the
    /// realised fractions.
    pub fn with_sets(
        g_prev: &Graph,
        prev_partition: &Partition,
        g_next: &Graph,
        mut fixed: Vec<usize>,
        mut pref: Vec<usize>,
    ) -> Result<Self> {
        prev_partition.check_covers(g_prev)?;
        let previous: Vec<Option<CommunityLabel>> = g_next
            .external_ids()
            .iter()
            .map(|id| g_prev.index_of(id).map(|i| prev_partition.label(i)))
            .collect();
        let remaining: Vec<usize> = (0..previous.len()).filter(|&x| previous[x].is_some()).collect();
        fixed.sort_unstable();
        fixed.dedup();
        pref.sort_unstable();
        pref.dedup();
        if let Some(&x) = fixed.iter().find(|&&x| x >= previous.len() || previous[x].is_none()) {
            return Err(Error::ContextMismatch(format!(
                "fixed node {x} is not present in both snapshots"
            )));
        }
        if let Some(&x) = pref.iter().find(|&&x| x >= previous.len()) {
            return Err(Error::ContextMismatch(format!("preferential node {x} is out of range")));
        }
        let n_next = previous.len() as f64;
        Ok(DynamicContext {
            prev_labels: prev_partition.assignment().iter().copied().collect(),
            p: if remaining.is_empty() { 0.0 } else { fixed.len() as f64 / remaining.len() as f64 },
            q: if previous.is_empty() { 0.0 } else { pref.len() as f64 / n_next },
            previous,
            remaining,
            fixed,
            pref,
            next_ids_fingerprint: fingerprint(g_next),
        })
    }

    pub(crate) fn check_graph(&self, g_next: &Graph) -> Result<()> {
        if g_next.node_count() != self.previous.len() || fingerprint(g_next) != self.next_ids_fingerprint {
            return Err(Error::ContextMismatch(format!(
                "context was built for a {}-node snapshot with different node ids, got {} nodes",
                self.previous.len(),
                g_next.node_count()
            )));
        }
        Ok(())
    }

    /// Nodes of the previous snapshot keep their label, new nodes start as
    /// singletons with fresh labels issued in node order.
    pub fn seeded_partition(&self, labels: &mut LabelAllocator, snapshot: u32) -> Partition {
        Partition::new(
            self.previous
                .iter()
                .map(|l| l.unwrap_or_else(|| labels.issue(snapshot)))
                .collect(),
        )
    }

    pub fn previous_label(&self, node: usize) -> Option<CommunityLabel> {
        self.previous[node]
    }

    /// Whether `label` names a community of the previous partition.
    pub fn existed_before(&self, label: CommunityLabel) -> bool {
        self.prev_labels.contains(&label)
    }

    pub fn remaining_nodes(&self) -> &[usize] {
        &self.remaining
    }

    pub fn fixed_nodes(&self) -> &[usize] {
        &self.fixed
    }

    pub fn pref_nodes(&self) -> &[usize] {
        &self.pref
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

fn fingerprint(g: &Graph) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    g.external_ids().hash(&mut h);
    h.finish()
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Half-up rounding of `fraction * len`.
fn sample_size(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64) + 0.5).floor().min(len as f64) as usize
}

fn sample(nodes: &[usize], fraction: f64, seed: u64) -> Vec<usize> {
    let amount = sample_size(nodes.len(), fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, nodes.len(), amount)
        .into_iter()
        .map(|i| nodes[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Uniform sample without replacement of `round(p * |remaining|)` nodes.
pub fn sample_fixed_set(remaining: &[usize], p: f64, seed: u64) -> Vec<usize> {
    sample(remaining, p, seed)
}

/// Uniform sample without replacement of `round(q * |nodes|)` nodes.
pub fn sample_pref_set(nodes: &[usize], q: f64, seed: u64) -> Vec<usize> {
    sample(nodes, q, seed)
}
