//! Modularity optimisation: plain Louvain, Louvain seeded from a previous
//! partition, and the dynamic variant with fixed nodes and preferential
//! attachment to communities that already existed.

mod context;
mod engine;
mod modularity;

use serde::{Deserialize, Serialize};

pub use context::{sample_fixed_set, sample_pref_set, DynamicContext};
pub use engine::{LevelReport, LouvainReport, PreferentialVisit};
pub use modularity::{modularity, modularity_gain, CommunitySums};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::{LabelAllocator, Partition};
use engine::{Preferential, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrder {
    /// Ascending internal index.
    #[default]
    Index,
    /// A seeded permutation, redrawn at every level.
    Shuffled,
}

/// How fixed nodes are treated above the first level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FixedPolicy {
    /// Supernodes that contain a fixed node never move, so every fixed node
    /// keeps its previous label in the final partition.
    #[default]
    FreezeAllLevels,
    /// Fixed nodes are pinned during the first level only; their supernodes
    /// may merge into other communities later.
    FirstLevelOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LouvainConfig {
    /// A move must improve modularity by more than this.
    pub min_gain_epsilon: f64,
    pub max_passes_per_level: usize,
    pub rng_seed: u64,
    pub node_order: NodeOrder,
    pub fixed_policy: FixedPolicy,
    /// Record every level-one visit of a preferential node.
    pub trace_preferential: bool,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig {
            min_gain_epsilon: 1e-9,
            max_passes_per_level: 100,
            rng_seed: 0,
            node_order: NodeOrder::Index,
            fixed_policy: FixedPolicy::FreezeAllLevels,
            trace_preferential: false,
        }
    }
}

impl LouvainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_gain_epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "min_gain_epsilon must be positive, got {}",
                self.min_gain_epsilon
            )));
        }
        if self.max_passes_per_level == 0 {
            return Err(Error::InvalidParameter("max_passes_per_level must be at least 1".into()));
        }
        Ok(())
    }
}

/// A partition together with the statistics of the run that produced it.
#[derive(Debug, Clone)]
pub struct Detection {
    pub partition: Partition,
    pub report: LouvainReport,
}

/// Louvain from singletons, or from `init` when given. Singleton starts
/// draw fresh labels from `labels` in node order, stamped with `snapshot`.
pub fn louvain_static(
    g: &Graph,
    cfg: &LouvainConfig,
    init: Option<&Partition>,
    labels: &mut LabelAllocator,
    snapshot: u32,
) -> Result<Detection> {
    cfg.validate()?;
    let init = match init {
        Some(p) => {
            p.check_covers(g)?;
            p.clone()
        }
        None => Partition::singletons(g.node_count(), labels, snapshot),
    };
    let (comm, community_labels) = init.to_dense();
    let seed = Seed {
        nontrivial: community_labels.len() < comm.len(),
        comm,
        labels: community_labels,
        frozen: vec![false; g.node_count()],
        preferential: None,
    };
    finish(g, seed, cfg)
}

/// One dynamic step: seeds from the previous partition, pins the fixed set
/// and applies preferential attachment at the first level.
pub fn louvain_dynamic(
    g_next: &Graph,
    ctx: &DynamicContext,
    cfg: &LouvainConfig,
    labels: &mut LabelAllocator,
    snapshot: u32,
) -> Result<Detection> {
    cfg.validate()?;
    ctx.check_graph(g_next)?;
    let init = ctx.seeded_partition(labels, snapshot);
    let (comm, community_labels) = init.to_dense();
    let n = g_next.node_count();
    let mut frozen = vec![false; n];
    for &x in ctx.fixed_nodes() {
        frozen[x] = true;
    }
    let mut members = vec![false; n];
    for &x in ctx.pref_nodes() {
        members[x] = true;
    }
    let pre_existing = community_labels.iter().map(|l| ctx.existed_before(*l)).collect();
    let seed = Seed {
        nontrivial: community_labels.len() < comm.len(),
        comm,
        labels: community_labels,
        frozen,
        preferential: Some(Preferential {
            members,
            pre_existing,
        }),
    };
    let detection = finish(g_next, seed, cfg)?;
    if cfg.fixed_policy == FixedPolicy::FreezeAllLevels {
        for &x in ctx.fixed_nodes() {
            if Some(detection.partition.label(x)) != ctx.previous_label(x) {
                return Err(Error::Invariant(format!(
                    "fixed node {} lost its previous label",
                    g_next.external_id(x)
                )));
            }
        }
    }
    Ok(detection)
}

fn finish(g: &Graph, seed: Seed, cfg: &LouvainConfig) -> Result<Detection> {
    let outcome = engine::run(g, seed, cfg)?;
    Ok(Detection {
        partition: Partition::new(outcome.assignment),
        report: outcome.report,
    })
}
