//! Two-phase hierarchical local moving with optional per-node constraints.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::modularity::{modularity_dense, move_delta};
use super::{FixedPolicy, LouvainConfig, NodeOrder};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::CommunityLabel;

const UNSET: f64 = f64::NEG_INFINITY;

/// Per-level statistics of one detection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub nodes: usize,
    pub communities_start: usize,
    pub communities_end: usize,
    pub sweeps: usize,
    pub moves: usize,
    pub frozen_nodes: usize,
    pub modularity_start: f64,
    /// Modularity after each sweep of the level.
    pub modularity_per_sweep: Vec<f64>,
    pub modularity_end: f64,
}

/// One level-one visit of a node in the preferential set, recorded when
/// [`LouvainConfig::trace_preferential`] is on.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferentialVisit {
    pub node: usize,
    /// Labels of the node's neighbors at visit time, self excluded.
    pub neighbor_labels: Vec<CommunityLabel>,
    pub from: CommunityLabel,
    pub to: CommunityLabel,
    /// Whether the candidate set was narrowed to pre-existing communities.
    pub restricted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LouvainReport {
    pub levels: Vec<LevelReport>,
    pub fixed_count: usize,
    pub preferential_count: usize,
    pub total_moves: usize,
    /// Level-one visits where the preferential rule narrowed the candidates.
    pub restricted_visits: usize,
    pub final_modularity: f64,
    #[serde(skip)]
    pub preferential_trace: Vec<PreferentialVisit>,
}

impl LouvainReport {
    /// Every recorded modularity value in run order.
    pub fn modularity_trajectory(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for level in &self.levels {
            out.push(level.modularity_start);
            out.extend(&level.modularity_per_sweep);
            out.push(level.modularity_end);
        }
        out
    }
}

/// Level-one preferential attachment rule.
pub(crate) struct Preferential {
    /// Node is in the preferential set.
    pub members: Vec<bool>,
    /// Community index carries a label that existed at the previous step.
    pub pre_existing: Vec<bool>,
}

pub(crate) struct Seed {
    /// Community index per node, dense in `[0, labels.len())`.
    pub comm: Vec<u32>,
    /// Label per community index, ascending.
    pub labels: Vec<CommunityLabel>,
    /// Nodes that never move.
    pub frozen: Vec<bool>,
    pub preferential: Option<Preferential>,
    /// Whether the seed groups nodes beyond singletons.
    pub nontrivial: bool,
}

pub(crate) struct Outcome {
    pub assignment: Vec<CommunityLabel>,
    pub report: LouvainReport,
}

struct MoveScratch {
    weight_to: Vec<f64>,
    touched: Vec<u32>,
}

impl MoveScratch {
    fn new(n: usize) -> Self {
        MoveScratch {
            weight_to: vec![UNSET; n],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, c: u32, w: f64) {
        let slot = &mut self.weight_to[c as usize];
        if *slot == UNSET {
            *slot = 0.0;
            self.touched.push(c);
        }
        *slot += w;
    }

    fn weight(&self, c: u32) -> f64 {
        let w = self.weight_to[c as usize];
        if w == UNSET {
            0.0
        } else {
            w
        }
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.weight_to[c as usize] = UNSET;
        }
        self.touched.clear();
    }
}

pub(crate) fn run(g: &Graph, seed: Seed, cfg: &LouvainConfig) -> Result<Outcome> {
    let Seed {
        mut comm,
        mut labels,
        mut frozen,
        mut preferential,
        nontrivial,
    } = seed;
    debug_assert_eq!(comm.len(), g.node_count());
    let mut report = LouvainReport {
        fixed_count: frozen.iter().filter(|&&f| f).count(),
        preferential_count: preferential
            .as_ref()
            .map_or(0, |p| p.members.iter().filter(|&&m| m).count()),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut level_graph: Cow<'_, Graph> = Cow::Borrowed(g);
    // level node of every original node
    let mut lifted: Vec<u32> = (0..g.node_count() as u32).collect();

    for level in 1.. {
        let graph = level_graph.as_ref();
        let n = graph.node_count();
        let mut tot = vec![0.0; labels.len()];
        for u in 0..n {
            tot[comm[u] as usize] += graph.strength(u);
        }
        let communities_start = count_nonempty(&comm, labels.len());
        let q_start = modularity_dense(graph, &comm, labels.len());
        let mut order: Vec<usize> = (0..n).collect();
        if cfg.node_order == NodeOrder::Shuffled {
            order.shuffle(&mut rng);
        }

        let mut scratch = MoveScratch::new(labels.len());
        let mut per_sweep = Vec::new();
        let mut level_moves = 0;
        let m2 = graph.total_weight_2m();
        while per_sweep.len() < cfg.max_passes_per_level {
            let mut moves = 0;
            for &x in &order {
                if frozen[x] {
                    continue;
                }
                let cx = comm[x];
                let kx = graph.strength(x);
                for (v, w) in graph.neighbors(x) {
                    scratch.add(comm[v], w);
                }
                let restrict = preferential.as_ref().filter(|p| p.members[x]).and_then(|p| {
                    scratch
                        .touched
                        .iter()
                        .any(|&c| p.pre_existing[c as usize])
                        .then_some(&p.pre_existing)
                });
                let to_current = scratch.weight(cx);
                let mut best = (0.0, cx);
                for &c in &scratch.touched {
                    if c == cx || restrict.is_some_and(|pre| !pre[c as usize]) {
                        continue;
                    }
                    let delta = move_delta(
                        m2,
                        kx,
                        scratch.weight(c),
                        to_current,
                        tot[c as usize],
                        tot[cx as usize],
                    );
                    if delta > best.0 || (delta == best.0 && c < best.1) {
                        best = (delta, c);
                    }
                }
                let target = if best.0 > cfg.min_gain_epsilon { best.1 } else { cx };
                if cfg.trace_preferential && level == 1 && preferential.as_ref().is_some_and(|p| p.members[x]) {
                    report.preferential_trace.push(PreferentialVisit {
                        node: x,
                        neighbor_labels: graph.neighbors(x).map(|(v, _)| labels[comm[v] as usize]).collect(),
                        from: labels[cx as usize],
                        to: labels[target as usize],
                        restricted: restrict.is_some(),
                    });
                }
                if restrict.is_some() {
                    report.restricted_visits += 1;
                }
                scratch.clear();
                if target != cx {
                    tot[cx as usize] -= kx;
                    tot[target as usize] += kx;
                    comm[x] = target;
                    moves += 1;
                }
            }
            per_sweep.push(modularity_dense(graph, &comm, labels.len()));
            level_moves += moves;
            if moves == 0 {
                break;
            }
        }

        let q_end = *per_sweep.last().unwrap_or(&q_start);
        if q_end + 1e-9 < q_start {
            return Err(Error::Invariant(format!(
                "modularity dropped from {q_start} to {q_end} at level {level}"
            )));
        }
        report.total_moves += level_moves;
        report.levels.push(LevelReport {
            level,
            nodes: n,
            communities_start,
            communities_end: count_nonempty(&comm, labels.len()),
            sweeps: per_sweep.len(),
            moves: level_moves,
            frozen_nodes: frozen.iter().filter(|&&f| f).count(),
            modularity_start: q_start,
            modularity_per_sweep: per_sweep,
            modularity_end: q_end,
        });

        // A seeded first level goes on to aggregation even without moves:
        // the seeded communities may still merge as supernodes.
        let seeded_first = level == 1 && nontrivial;
        let improved = level_moves > 0 && q_end - q_start >= cfg.min_gain_epsilon;
        if !(improved || seeded_first) {
            break;
        }

        // phase 2: collapse communities into supernodes, keeping index order
        let mut remap = vec![u32::MAX; labels.len()];
        let mut next_labels = Vec::new();
        let mut used = vec![false; labels.len()];
        for &c in &comm {
            used[c as usize] = true;
        }
        for (c, &u) in used.iter().enumerate() {
            if u {
                remap[c] = next_labels.len() as u32;
                next_labels.push(labels[c]);
            }
        }
        let next_count = next_labels.len();
        if next_count == n && !seeded_first {
            break;
        }
        let mut next_frozen = vec![false; next_count];
        if cfg.fixed_policy == FixedPolicy::FreezeAllLevels {
            for u in 0..n {
                if frozen[u] {
                    next_frozen[remap[comm[u] as usize] as usize] = true;
                }
            }
        }
        let supernode_comm: Vec<u32> = comm.iter().map(|&c| remap[c as usize]).collect();
        for x in lifted.iter_mut() {
            *x = supernode_comm[*x as usize];
        }
        let ids = next_labels.iter().map(|l| l.value().to_string()).collect();
        let collapsed = graph.collapse(&supernode_comm, ids);
        level_graph = Cow::Owned(collapsed);
        comm = (0..next_count as u32).collect();
        labels = next_labels;
        frozen = next_frozen;
        preferential = None;
        if next_count == 0 {
            break;
        }
    }

    let assignment: Vec<CommunityLabel> =
        lifted.iter().map(|&x| labels[comm[x as usize] as usize]).collect();
    report.final_modularity = report.levels.last().map_or(0.0, |l| l.modularity_end);
    Ok(Outcome { assignment, report })
}

fn count_nonempty(comm: &[u32], count: usize) -> usize {
    let mut used = vec![false; count];
    for &c in comm {
        used[c as usize] = true;
    }
    used.iter().filter(|&&u| u).count()
}
