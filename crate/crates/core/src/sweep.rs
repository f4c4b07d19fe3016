//! Grid evaluation of the dynamic step over fixed-node and
//! preferential-attachment probabilities.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::louvain::{louvain_dynamic, louvain_static, DynamicContext, LouvainConfig};
use crate::metrics::{common_nodes, compare, MatchConfig};
use crate::partition::{LabelAllocator, Partition};

pub const CSV_HEADER: &str = "p_pct,q_pct,seed,mi_nats,matching_count,modularity,runtime_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub p_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub r: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() || self.q_values.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter("sweep lists must be nonempty".into()));
        }
        if let Some(v) = self.p_values.iter().chain(&self.q_values).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("probability {v} outside [0, 1]")));
        }
        MatchConfig::new(self.r).map(|_| ())
    }

    fn points(&self) -> Vec<(f64, f64, u64)> {
        let mut pts = Vec::with_capacity(self.p_values.len() * self.q_values.len() * self.seeds.len());
        for &p in &self.p_values {
            for &q in &self.q_values {
                for &s in &self.seeds {
                    pts.push((p, q, s));
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub mutual_information_nats: f64,
    pub matching_count: usize,
    pub modularity_next: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Runs sweep points on the rayon pool; same as `Sequential` when the
    /// `parallel` feature is off.
    #[default]
    Parallel,
}

struct Baseline {
    partition: Partition,
    labels: LabelAllocator,
}

/// One row per `(p, q, seed)`, ordered by `p`, then `q`, then seed, as
/// listed in `spec`.
pub fn run_sweep(g_t: &Graph, g_t1: &Graph, spec: &SweepSpec, cfg: &LouvainConfig) -> Result<Vec<SweepResult>> {
    run_sweep_with(g_t, g_t1, spec, cfg, Execution::default())
}

pub fn run_sweep_with(
    g_t: &Graph,
    g_t1: &Graph,
    spec: &SweepSpec,
    cfg: &LouvainConfig,
    exec: Execution,
) -> Result<Vec<SweepResult>> {
    spec.validate()?;
    cfg.validate()?;
    if common_nodes(g_t, g_t1).is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let matching = MatchConfig::new(spec.r)?;

    let baseline = |seed: u64| -> Result<Baseline> {
        let mut labels = LabelAllocator::new();
        let d = louvain_static(g_t, &cfg.clone().with_seed(seed), None, &mut labels, 0)?;
        Ok(Baseline {
            partition: d.partition,
            labels,
        })
    };
    let baselines: Vec<Baseline> = map_maybe_parallel(&spec.seeds, exec, |&s| baseline(s))?;

    let points = spec.points();
    let evaluate = |&(p, q, seed): &(f64, f64, u64)| -> Result<SweepResult> {
        let base = &baselines[spec.seeds.iter().position(|&s| s == seed).expect("seed is listed")];
        let start = Instant::now();
        let ctx = DynamicContext::build(g_t, &base.partition, g_t1, p, q, seed)?;
        let mut labels = base.labels.clone();
        let d = louvain_dynamic(g_t1, &ctx, &cfg.clone().with_seed(seed), &mut labels, 1)?;
        let report = compare(g_t, &base.partition, g_t1, &d.partition, &matching)?;
        Ok(SweepResult {
            p,
            q,
            seed,
            mutual_information_nats: report.mutual_information_nats,
            matching_count: report.matching_count,
            modularity_next: report.modularity_next,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    };
    map_maybe_parallel(&points, exec, evaluate)
}

fn map_maybe_parallel<T, R, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Writes the CSV with percentages for `p` and `q`. With `timing` off the
/// runtime column is written as 0 so reruns are byte-identical.
pub fn write_csv<W: Write>(rows: &[SweepResult], mut out: W, timing: bool) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let runtime = if timing { format!("{:.3}", r.runtime_ms) } else { "0".to_string() };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.p * 100.0,
            r.q * 100.0,
            r.seed,
            r.mutual_information_nats,
            r.matching_count,
            r.modularity_next,
            runtime
        )?;
    }
    Ok(())
}

/// Mean of a column over all seeds, per `(p, q)` grid point in sweep order.
pub fn grid_means(rows: &[SweepResult], column: impl Fn(&SweepResult) -> f64) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|e| e.0 == r.p && e.1 == r.q) {
            Some(e) => {
                e.2 += column(r);
                e.3 += 1;
            }
            None => out.push((r.p, r.q, column(r), 1)),
        }
    }
    out.into_iter().map(|(p, q, s, n)| (p, q, s / n as f64)).collect()
}
