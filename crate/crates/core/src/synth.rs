//! Evolving planted-partition graphs for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};
use crate::partition::Partition;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_nodes: usize,
    pub n_communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Fraction of nodes replaced by newcomers at each step.
    pub churn_rate: f64,
    /// Fraction of surviving nodes that switch planted community per step.
    pub migrate_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_nodes == 0 || self.n_communities == 0 || self.steps == 0 {
            return bad("nodes, communities and steps must be positive".into());
        }
        if self.n_communities > self.n_nodes {
            return bad(format!(
                "{} communities cannot be planted on {} nodes",
                self.n_communities, self.n_nodes
            ));
        }
        if !(self.p_in > 0.0 && self.p_in <= 1.0) || !(self.p_out >= 0.0 && self.p_out < 1.0) {
            return bad(format!("need 0 < p_in <= 1 and 0 <= p_out < 1, got {} and {}", self.p_in, self.p_out));
        }
        if !(self.p_in > self.p_out) {
            return bad("p_in must exceed p_out".into());
        }
        for (name, v) in [("churn", self.churn_rate), ("migrate", self.migrate_rate)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} rate must lie in [0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub graph: Graph,
    pub planted: Partition,
}

#[derive(Debug, Clone, Copy)]
struct Member {
    id: u64,
    community: u32,
}

/// Generates `spec.steps` snapshots. Node ids are `n<k>` with `k` from a
/// monotone counter, so retired ids never come back.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Snapshot>> {
    spec.validate()?;
    let k = spec.n_communities;
    let mut evolve = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let mut planted: Vec<u32> = (0..spec.n_nodes).map(|i| (i % k) as u32).collect();
    planted.shuffle(&mut evolve);
    let mut members: Vec<Member> = planted
        .into_iter()
        .enumerate()
        .map(|(i, community)| Member { id: i as u64, community })
        .collect();
    let mut next_id = spec.n_nodes as u64;

    let mut out = Vec::with_capacity(spec.steps);
    for step in 0..spec.steps {
        if step > 0 {
            members = evolve_members(members, spec, &mut evolve, &mut next_id);
        }
        let mut edge_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 + step as u64));
        out.push(sample_snapshot(&members, spec, &mut edge_rng));
    }
    Ok(out)
}

fn rounded(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 0.5).floor().min(n as f64) as usize
}

fn evolve_members(members: Vec<Member>, spec: &SynthSpec, rng: &mut ChaCha8Rng, next_id: &mut u64) -> Vec<Member> {
    let n = members.len();
    let k = spec.n_communities as u32;
    let churned = rounded(spec.churn_rate, n);
    let mut leaving = vec![false; n];
    for i in rand::seq::index::sample(rng, n, churned) {
        leaving[i] = true;
    }
    let mut survivors: Vec<Member> = members
        .into_iter()
        .zip(leaving)
        .filter_map(|(m, gone)| (!gone).then_some(m))
        .collect();
    let migrating = rounded(spec.migrate_rate, survivors.len());
    if k > 1 {
        for i in rand::seq::index::sample(rng, survivors.len(), migrating) {
            let old = survivors[i].community;
            let shift = rng.gen_range(1..k);
            survivors[i].community = (old + shift) % k;
        }
    }
    for _ in 0..churned {
        survivors.push(Member {
            id: *next_id,
            community: rng.gen_range(0..k),
        });
        *next_id += 1;
    }
    survivors
}

/// Calls `f` with each index in `[0, total)` independently with
/// probability `p`, by geometric skipping.
fn bernoulli_indices(total: u64, p: f64, rng: &mut ChaCha8Rng, mut f: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(f);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut i: u64 = 0;
    loop {
        let r: f64 = rng.gen();
        let skip = ((1.0 - r).ln() / log_q).floor();
        if skip >= (total - i) as f64 {
            return;
        }
        i += skip as u64;
        f(i);
        i += 1;
        if i >= total {
            return;
        }
    }
}

/// Position `t` in the row-major enumeration of pairs `i < j`.
fn triangular_pair(t: u64) -> (u64, u64) {
    let mut j = ((1.0 + (1.0 + 8.0 * t as f64).sqrt()) / 2.0).floor() as u64;
    while j * (j - 1) / 2 > t {
        j -= 1;
    }
    while (j + 1) * j / 2 <= t {
        j += 1;
    }
    (t - j * (j - 1) / 2, j)
}

fn sample_snapshot(members: &[Member], spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Snapshot {
    let k = spec.n_communities;
    let mut builder = GraphBuilder::new();
    let mut blocks: Vec<Vec<String>> = vec![Vec::new(); k];
    for m in members {
        let id = format!("n{}", m.id);
        builder.add_node(&id);
        blocks[m.community as usize].push(id);
    }
    for a in 0..k {
        let block = &blocks[a];
        let s = block.len() as u64;
        bernoulli_indices(s * s.saturating_sub(1) / 2, spec.p_in, rng, |t| {
            let (i, j) = triangular_pair(t);
            builder.add_edge(&block[i as usize], &block[j as usize], 1.0).expect("unit weight");
        });
        for other in &blocks[a + 1..] {
            let sb = other.len() as u64;
            bernoulli_indices(s * sb, spec.p_out, rng, |t| {
                builder
                    .add_edge(&block[(t / sb) as usize], &other[(t % sb) as usize], 1.0)
                    .expect("unit weight");
            });
        }
    }
    Snapshot {
        graph: builder.build(),
        planted: Partition::from_values(&members.iter().map(|m| m.community as u64).collect::<Vec<_>>()),
    }
}
