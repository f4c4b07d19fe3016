use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use commtrack::ingest::{self, ParseOptions, WeightMode, WindowSpec, YearMonth};
use commtrack::louvain::{louvain_dynamic, louvain_static, DynamicContext, FixedPolicy, LouvainConfig, NodeOrder};
use commtrack::metrics::{compare, MatchConfig};
use commtrack::sweep::{run_sweep_with, write_csv, Execution, SweepSpec};
use commtrack::synth::{generate, SynthSpec};
use commtrack::tracker::{Timeline, TrackerConfig};
use commtrack::{Error, Graph, LabelAllocator, Partition};

#[derive(Parser)]
#[command(name = "commtrack", version, about = "Stable community tracking over graph snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Index,
    Shuffled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Freeze,
    FirstLevel,
}

#[derive(clap::Args, Clone)]
struct LouvainArgs {
    /// Node visiting order in each sweep.
    #[arg(long, value_enum, default_value = "index")]
    order: Order,
    /// Treatment of fixed nodes above the first level.
    #[arg(long, value_enum, default_value = "freeze")]
    fixed_policy: Policy,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_passes: usize,
}

impl LouvainArgs {
    fn config(&self, seed: u64) -> LouvainConfig {
        LouvainConfig {
            min_gain_epsilon: self.epsilon,
            max_passes_per_level: self.max_passes,
            rng_seed: seed,
            node_order: match self.order {
                Order::Index => NodeOrder::Index,
                Order::Shuffled => NodeOrder::Shuffled,
            },
            fixed_policy: match self.fixed_policy {
                Policy::Freeze => FixedPolicy::FreezeAllLevels,
                Policy::FirstLevel => FixedPolicy::FirstLevelOnly,
            },
            trace_preferential: false,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a monthly social graph from communication records.
    Ingest {
        #[arg(long, num_args = 1.., required = true)]
        cdr: Vec<PathBuf>,
        /// Anchor month, YYYY-MM.
        #[arg(long)]
        month: YearMonth,
        #[arg(long, default_value_t = 3)]
        span: u32,
        #[arg(long, default_value_t = 200)]
        cap: usize,
        /// unit or comm_count
        #[arg(long, default_value = "unit")]
        weight: WeightMode,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        utc_offset_minutes: i32,
        #[arg(long, default_value_t = 1.0)]
        max_malformed: f64,
        #[arg(short, long)]
        output: PathBuf,
        /// Optional JSON summary of rejections and removed nodes.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Detect communities, optionally as a dynamic step from a previous partition.
    Detect {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        prev_partition: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        louvain: LouvainArgs,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare two consecutive partitions.
    Compare {
        #[arg(long)]
        prev: PathBuf,
        #[arg(long)]
        next: PathBuf,
        /// Graph of the next snapshot, for its modularity.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.51)]
        r: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Add a snapshot to a timeline directory, creating it if needed.
    Track {
        #[arg(long)]
        timeline: PathBuf,
        #[arg(long)]
        add: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.51)]
        r: f64,
        #[command(flatten)]
        louvain: LouvainArgs,
    },
    /// Generate evolving planted-partition snapshots.
    Synth {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        communities: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0.0)]
        churn: f64,
        #[arg(long, default_value_t = 0.0)]
        migrate: f64,
        #[arg(long, default_value_t = 2)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate the dynamic step over a grid of p and q (percentages).
    Sweep {
        #[arg(long)]
        graph_t: PathBuf,
        #[arg(long)]
        graph_t1: PathBuf,
        #[arg(long, default_value = "0,25,50,75,100")]
        p: String,
        #[arg(long, default_value = "0")]
        q: String,
        /// Comma list or inclusive range such as 1..10.
        #[arg(long, default_value = "1..10")]
        seeds: String,
        #[arg(long, default_value_t = 0.51)]
        r: f64,
        #[command(flatten)]
        louvain: LouvainArgs,
        /// Write 0 in the runtime column so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        /// Evaluate sweep points one at a time.
        #[arg(long)]
        sequential: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn read_graph(path: &Path) -> anyhow::Result<Graph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Graph::read_edge_list(BufReader::new(file))?)
}

fn read_partition_for(g: &Graph, path: &Path) -> anyhow::Result<Partition> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Partition::read_tsv(g, BufReader::new(file))?)
}

fn read_partition(path: &Path) -> anyhow::Result<(Graph, Partition)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Partition::read_tsv_standalone(BufReader::new(file))?)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn percentages(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().with_context(|| format!("bad percentage {s:?}"))?;
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("percentage {v} outside [0, 100]")).into());
            }
            Ok(v / 100.0)
        })
        .collect()
}

fn seed_list(spec: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            return Err(Error::InvalidParameter(format!("empty seed range {spec}")).into());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| Ok(s.trim().parse()?)).collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest {
            cdr,
            month,
            span,
            cap,
            weight,
            utc_offset_minutes,
            max_malformed,
            output,
            report,
        } => {
            let opts = ParseOptions {
                utc_offset_minutes,
                max_malformed_fraction: max_malformed,
            };
            let mut window = WindowSpec::new(month, span)?;
            window.utc_offset_minutes = utc_offset_minutes;
            let (records, rejected) = ingest::parse_files(&cdr, &opts)?;
            let counts = ingest::aggregate_window(&records, &window);
            let symmetric = ingest::symmetrize(&counts, weight);
            let (graph, filtered) = ingest::filter_high_degree(&symmetric, cap);
            let mut out = create(&output)?;
            graph.write_edge_list(&mut out)?;
            out.flush()?;
            eprintln!(
                "{} records ({} malformed, {} self) -> {} directed pairs -> {} nodes, {} edges; {} nodes above degree {cap}",
                records.len(),
                rejected.malformed,
                rejected.self_records,
                counts.len(),
                graph.node_count(),
                graph.edge_count(),
                filtered.removed.len()
            );
            if let Some(path) = report {
                write_json(
                    &path,
                    &serde_json::json!({ "rejections": rejected, "degree_filter": filtered }),
                )?;
            }
        }
        Command::Detect {
            graph,
            prev_partition,
            p,
            q,
            seed,
            louvain,
            output,
            report,
        } => {
            let g = read_graph(&graph)?;
            let cfg = louvain.config(seed);
            let detection = match prev_partition {
                None => louvain_static(&g, &cfg, None, &mut LabelAllocator::new(), 0)?,
                Some(path) => {
                    let (g_prev, prev) = read_partition(&path)?;
                    let next_label = prev.live_labels().last().map_or(0, |l| l.value() + 1);
                    let snapshot = prev.assignment().iter().map(|l| l.origin_snapshot()).max().map_or(0, |s| s + 1);
                    let ctx = DynamicContext::build(&g_prev, &prev, &g, p, q, seed)?;
                    louvain_dynamic(&g, &ctx, &cfg, &mut LabelAllocator::starting_at(next_label), snapshot)?
                }
            };
            let mut out = create(&output)?;
            detection.partition.write_tsv(&g, &mut out)?;
            out.flush()?;
            eprintln!(
                "{} communities, modularity {:.6}",
                detection.partition.community_count(),
                detection.report.final_modularity
            );
            if let Some(path) = report {
                write_json(&path, &detection.report)?;
            }
        }
        Command::Compare {
            prev,
            next,
            graph,
            r,
            output,
        } => {
            let g_next = read_graph(&graph)?;
            let (g_prev, part_prev) = read_partition(&prev)?;
            let part_next = read_partition_for(&g_next, &next)?;
            let report = compare(&g_prev, &part_prev, &g_next, &part_next, &MatchConfig::new(r)?)?;
            match output {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Track {
            timeline,
            add,
            p,
            q,
            seed,
            r,
            louvain,
        } => {
            let g = read_graph(&add)?;
            if Timeline::exists(&timeline) {
                let mut tl = Timeline::load(&timeline)?;
                let rec = tl.step(g, p, q, seed)?;
                eprintln!(
                    "step {}: MI {:.6} nats, {} matching, modularity {:.6}, {} births, {} deaths",
                    rec.step,
                    rec.comparison.mutual_information_nats,
                    rec.comparison.matching_count,
                    rec.comparison.modularity_next,
                    rec.births.len(),
                    rec.deaths.len()
                );
                tl.save(&timeline)?;
            } else {
                let config = TrackerConfig {
                    louvain: louvain.config(seed),
                    matching: MatchConfig::new(r)?,
                };
                let tl = Timeline::bootstrap(g, config, seed)?;
                eprintln!("step 0: {} communities", tl.steps()[0].partition.community_count());
                tl.save(&timeline)?;
            }
        }
        Command::Synth {
            nodes,
            communities,
            p_in,
            p_out,
            churn,
            migrate,
            steps,
            seed,
            output,
        } => {
            let spec = SynthSpec {
                n_nodes: nodes,
                n_communities: communities,
                p_in,
                p_out,
                churn_rate: churn,
                migrate_rate: migrate,
                steps,
                seed,
            };
            let snapshots = generate(&spec)?;
            fs::create_dir_all(&output)?;
            for (k, snap) in snapshots.iter().enumerate() {
                let mut out = create(&output.join(format!("step_{k}.graph.tsv")))?;
                snap.graph.write_edge_list(&mut out)?;
                out.flush()?;
                let mut out = create(&output.join(format!("step_{k}.planted.tsv")))?;
                snap.planted.write_tsv(&snap.graph, &mut out)?;
                out.flush()?;
            }
            write_json(&output.join("spec.json"), &spec)?;
        }
        Command::Sweep {
            graph_t,
            graph_t1,
            p,
            q,
            seeds,
            r,
            louvain,
            no_timing,
            sequential,
            output,
        } => {
            let spec = SweepSpec {
                p_values: percentages(&p)?,
                q_values: percentages(&q)?,
                seeds: seed_list(&seeds)?,
                r,
            };
            let g_t = read_graph(&graph_t)?;
            let g_t1 = read_graph(&graph_t1)?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let rows = run_sweep_with(&g_t, &g_t1, &spec, &louvain.config(0), exec)?;
            let mut out = create(&output)?;
            write_csv(&rows, &mut out, !no_timing)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Error>().map_or(2, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
