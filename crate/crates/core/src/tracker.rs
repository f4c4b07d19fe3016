//! A timeline of snapshots with persistent community labels.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::louvain::{louvain_dynamic, louvain_static, DynamicContext, LouvainConfig};
use crate::metrics::{compare, ComparisonReport, MatchConfig};
use crate::partition::{LabelAllocator, Partition};
use crate::seed::derive_seed;

const META_FILE: &str = "timeline.json";
const HISTORY_FILE: &str = "history.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub louvain: LouvainConfig,
    pub matching: MatchConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            louvain: LouvainConfig::default(),
            matching: MatchConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimelineStep {
    pub graph: Graph,
    pub partition: Partition,
}

/// Comparison of step `step` against step `step - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub fixed_count: usize,
    pub preferential_count: usize,
    #[serde(flatten)]
    pub comparison: ComparisonReport,
    /// Labels of the new partition without a matching predecessor.
    pub births: Vec<u64>,
    /// Labels of the previous partition without a matching successor.
    pub deaths: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Timeline {
    steps: Vec<TimelineStep>,
    labels: LabelAllocator,
    history: Vec<StepRecord>,
    config: TrackerConfig,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    steps: usize,
    next_label: u64,
    config: TrackerConfig,
}

impl Timeline {
    /// Partitions the first snapshot with plain Louvain from singletons.
    pub fn bootstrap(g0: Graph, config: TrackerConfig, seed: u64) -> Result<Self> {
        let mut labels = LabelAllocator::new();
        let cfg = config.louvain.clone().with_seed(derive_seed(seed, 0));
        let detection = louvain_static(&g0, &cfg, None, &mut labels, 0)?;
        Ok(Timeline {
            steps: vec![TimelineStep {
                graph: g0,
                partition: detection.partition,
            }],
            labels,
            history: Vec::new(),
            config,
        })
    }

    /// Runs the dynamic step against the latest snapshot. On error the
    /// timeline is left untouched.
    pub fn step(&mut self, g_next: Graph, p: f64, q: f64, seed: u64) -> Result<&StepRecord> {
        let index = self.steps.len();
        let step_seed = derive_seed(seed, index as u64);
        let last = self.steps.last().expect("a timeline holds at least one step");
        let ctx = DynamicContext::build(&last.graph, &last.partition, &g_next, p, q, step_seed)?;
        let mut labels = self.labels.clone();
        let cfg = self.config.louvain.clone().with_seed(step_seed);
        let detection = louvain_dynamic(&g_next, &ctx, &cfg, &mut labels, index as u32)?;
        let comparison = compare(
            &last.graph,
            &last.partition,
            &g_next,
            &detection.partition,
            &self.config.matching,
        )?;
        let matched_prev: Vec<u64> = comparison.matching_pairs.iter().map(|m| m.prev).collect();
        let matched_next: Vec<u64> = comparison.matching_pairs.iter().map(|m| m.next).collect();
        let deaths = last
            .partition
            .live_labels()
            .into_iter()
            .map(|l| l.value())
            .filter(|v| !matched_prev.contains(v))
            .collect();
        let births = detection
            .partition
            .live_labels()
            .into_iter()
            .map(|l| l.value())
            .filter(|v| !matched_next.contains(v))
            .collect();
        self.history.push(StepRecord {
            step: index,
            p,
            q,
            seed: step_seed,
            fixed_count: ctx.fixed_nodes().len(),
            preferential_count: ctx.pref_nodes().len(),
            comparison,
            births,
            deaths,
        });
        self.labels = labels;
        self.steps.push(TimelineStep {
            graph: g_next,
            partition: detection.partition,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    pub fn steps(&self) -> &[TimelineStep] {
        &self.steps
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn next_label(&self) -> u64 {
        self.labels.peek_next()
    }

    /// Writes `step_<k>.graph.tsv`, `step_<k>.partition.tsv`,
    /// `history.jsonl` and a small metadata file into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (k, step) in self.steps.iter().enumerate() {
            let mut out = BufWriter::new(File::create(dir.join(format!("step_{k}.graph.tsv")))?);
            step.graph.write_edge_list(&mut out)?;
            out.flush()?;
            let mut out = BufWriter::new(File::create(dir.join(format!("step_{k}.partition.tsv")))?);
            step.partition.write_tsv(&step.graph, &mut out)?;
            out.flush()?;
        }
        let mut out = BufWriter::new(File::create(dir.join(HISTORY_FILE))?);
        for record in &self.history {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let meta = Meta {
            steps: self.steps.len(),
            next_label: self.labels.peek_next(),
            config: self.config.clone(),
        };
        fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Whether `dir` holds a saved timeline.
    pub fn exists(dir: &Path) -> bool {
        dir.join(META_FILE).is_file()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
        let mut steps = Vec::with_capacity(meta.steps);
        for k in 0..meta.steps {
            let graph = Graph::read_edge_list(BufReader::new(File::open(dir.join(format!("step_{k}.graph.tsv")))?))?;
            let partition =
                Partition::read_tsv(&graph, BufReader::new(File::open(dir.join(format!("step_{k}.partition.tsv")))?))?;
            steps.push(TimelineStep { graph, partition });
        }
        let history = fs::read_to_string(dir.join(HISTORY_FILE))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<StepRecord>, _>>()?;
        if steps.is_empty() || history.len() + 1 != steps.len() {
            return Err(Error::Invariant(format!(
                "timeline has {} steps but {} history rows",
                steps.len(),
                history.len()
            )));
        }
        Ok(Timeline {
            steps,
            labels: LabelAllocator::starting_at(meta.next_label),
            history,
            config: meta.config,
        })
    }
}
