mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use delegate_bfs::cost_model::{weak_scaling_sweep, CostModelParams, WeakScaling};
use delegate_bfs::edge_list::{EdgeFormat, EdgeList};
use delegate_bfs::engine::{pick_sources, run_bfs, summarize, BenchmarkReport, BfsRun, Mode, PhaseTimes, RunReport};
use delegate_bfs::oracle::{oracle_dobfs_inspections, reference_bfs};
use delegate_bfs::partition::{compute_out_degrees, partition, BucketReport, EdgeKind};
use delegate_bfs::rmat::{graph500_graph, RmatParams};
use delegate_bfs::store::{MemoryReport, PartitionedGraph};
use serde::Serialize;

use config::{parse_factors, RunConfig, Theta};

#[derive(Parser)]
#[command(name = "delegate-bfs", version, about = "Delegate-partitioned BFS on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an RMAT graph and write it as an edge list.
    Generate(Common),
    /// Classify and distribute a graph; optionally save the worker files.
    Partition(Common),
    /// Run BFS or DOBFS and write a JSON report.
    Run {
        #[command(flatten)]
        common: Common,
        /// Record wall-clock time and TEPS (makes the report non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Byte accounting of the partitioned graph.
    Memory(Common),
    /// One CSV row per degree threshold.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
        thetas: Vec<u64>,
        #[arg(long)]
        timing: bool,
    },
    /// Check partition invariants and compare levels against a sequential BFS.
    Verify(Common),
    /// Closed-form communication cost over a sweep of worker counts.
    Cost {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cost: CostArgs,
    },
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge list to load instead of generating (.bin/.del binary, else text).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Directory of saved worker files from `partition --out`.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    scale: Option<u32>,
    #[arg(long)]
    edge_factor: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Degree threshold, or "auto".
    #[arg(long)]
    theta: Option<Theta>,
    /// Cluster shape as nodes x ranks x gpus, e.g. 2x2x2.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Forward-to-backward factors for dd,dn,nd.
    #[arg(long, value_parser = parse_factors)]
    factors: Option<[f64; 3]>,
    #[arg(long)]
    local_all2all: bool,
    #[arg(long)]
    uniquify: bool,
    /// Number of random search keys.
    #[arg(long)]
    sources: Option<usize>,
    /// A single explicit search key.
    #[arg(long)]
    source: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
struct CostArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024,4096")]
    p_list: Vec<u64>,
    /// log2 of vertices per worker.
    #[arg(long, default_value_t = 20)]
    worker_scale: u32,
    #[arg(long, default_value_t = 32.0)]
    edge_factor_doubled: f64,
    #[arg(long, default_value_t = 4)]
    p_gpu: u64,
    /// Link bandwidth in bytes per second.
    #[arg(long, default_value_t = 12.5e9)]
    bandwidth: f64,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s.to_ascii_lowercase().as_str() {
        "bfs" => Ok(Mode::Bfs),
        "dobfs" => Ok(Mode::Dobfs),
        _ => Err(format!("expected bfs or dobfs, got {s:?}")),
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let flags = RunConfig {
            graph: self.graph.clone(),
            partition: self.partition.clone(),
            scale: self.scale,
            edge_factor: self.edge_factor,
            seed: self.seed,
            theta: self.theta,
            shape: self.shape.clone(),
            mode: self.mode,
            factors: self.factors,
            local_all2all: self.local_all2all.then_some(true),
            uniquify: self.uniquify.then_some(true),
            sources: self.sources,
            source: self.source,
            out: self.out.clone(),
        };
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(flags.or(file))
    }
}

#[derive(Clone, Debug, Serialize)]
struct GraphSource {
    path: Option<PathBuf>,
    scale: u32,
    edge_factor: Option<u64>,
    seed: Option<u64>,
}

fn log2_ceil(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

fn load_graph(cfg: &RunConfig) -> Result<(EdgeList, GraphSource)> {
    if let Some(path) = &cfg.graph {
        let g = EdgeList::load(path, EdgeFormat::from_path(path)).with_context(|| format!("loading {}", path.display()))?;
        let g = if g.check_symmetric() {
            g
        } else {
            eprintln!("note: {} is not symmetric; adding reverse edges", path.display());
            g.symmetrize()
        };
        let scale = log2_ceil(g.n);
        return Ok((
            g,
            GraphSource {
                path: Some(path.clone()),
                scale,
                edge_factor: None,
                seed: None,
            },
        ));
    }
    let Some(scale) = cfg.scale else {
        bail!("invalid config: one of `graph`, `partition` or `scale` must be set");
    };
    let mut params = RmatParams::with_scale(scale, cfg.seed());
    if let Some(ef) = cfg.edge_factor {
        params.edge_factor = ef;
    }
    params.validate().context("invalid field `scale` or `edge_factor`")?;
    let g = graph500_graph(&params)?;
    Ok((
        g,
        GraphSource {
            path: None,
            scale,
            edge_factor: Some(params.edge_factor),
            seed: Some(params.seed),
        },
    ))
}

struct Loaded {
    pg: PartitionedGraph,
    graph: Option<EdgeList>,
    source: GraphSource,
    buckets: Option<BucketReport>,
}

fn load_partitioned(cfg: &RunConfig) -> Result<Loaded> {
    if let Some(dir) = &cfg.partition {
        let pg = PartitionedGraph::load(dir).with_context(|| format!("loading partition {}", dir.display()))?;
        let source = GraphSource {
            path: Some(dir.clone()),
            scale: log2_ceil(pg.n),
            edge_factor: None,
            seed: None,
        };
        return Ok(Loaded {
            pg,
            graph: None,
            source,
            buckets: None,
        });
    }
    let (g, source) = load_graph(cfg)?;
    let theta = cfg.theta().resolve(source.scale);
    let (pg, buckets) = partition(&g, theta, &cfg.shape()?)?;
    Ok(Loaded {
        pg,
        graph: Some(g),
        source,
        buckets: Some(buckets),
    })
}

fn out_degrees(loaded: &Loaded) -> Vec<u64> {
    match &loaded.graph {
        Some(g) => compute_out_degrees(g),
        None => compute_out_degrees(&EdgeList::new(loaded.pg.n, loaded.pg.reconstruct_edges())),
    }
}

fn search_keys(cfg: &RunConfig, loaded: &Loaded, default_count: usize) -> Result<Vec<u64>> {
    if let Some(s) = cfg.source {
        if s >= loaded.pg.n {
            bail!("invalid field `source`: {s} is not below n = {}", loaded.pg.n);
        }
        return Ok(vec![s]);
    }
    let count = cfg.sources.unwrap_or(default_count);
    if count == 0 {
        bail!("invalid field `sources`: must be at least 1");
    }
    let keys = pick_sources(&out_degrees(loaded), count, cfg.seed());
    if keys.is_empty() {
        bail!("graph has no edges to search from");
    }
    Ok(keys)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

#[derive(Serialize)]
struct GraphInfo {
    source: GraphSource,
    n: u64,
    m: u64,
    theta: u64,
    shape: String,
    p: usize,
    d: usize,
    nn_edges: u64,
    nd_edges: u64,
    dn_edges: u64,
    dd_edges: u64,
}

impl GraphInfo {
    fn of(loaded: &Loaded) -> Self {
        let pg = &loaded.pg;
        GraphInfo {
            source: loaded.source.clone(),
            n: pg.n,
            m: pg.m(),
            theta: pg.theta,
            shape: pg.shape.to_string(),
            p: pg.p(),
            d: pg.d(),
            nn_edges: pg.kind_count(EdgeKind::Nn),
            nd_edges: pg.kind_count(EdgeKind::Nd),
            dn_edges: pg.kind_count(EdgeKind::Dn),
            dd_edges: pg.kind_count(EdgeKind::Dd),
        }
    }
}

fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let Some(out) = &cfg.out else {
        bail!("invalid config: `out` is required for generate");
    };
    let (g, _) = load_graph(cfg)?;
    g.write(out, EdgeFormat::from_path(out))?;
    eprintln!("wrote {} edges over {} vertices to {}", g.len(), g.n, out.display());
    Ok(())
}

#[derive(Serialize)]
struct PartitionOutput {
    graph: GraphInfo,
    buckets: Option<BucketReport>,
    memory: MemoryReport,
}

fn cmd_partition(cfg: &RunConfig) -> Result<()> {
    let loaded = load_partitioned(cfg)?;
    if let Some(dir) = &cfg.out {
        loaded.pg.save(dir)?;
        eprintln!("saved {} worker files to {}", loaded.pg.p(), dir.display());
    }
    emit_json(
        None,
        &PartitionOutput {
            graph: GraphInfo::of(&loaded),
            buckets: loaded.buckets.clone(),
            memory: loaded.pg.memory_footprint(),
        },
    )
}

#[derive(Serialize)]
struct SearchKey {
    source: u64,
}

#[derive(Serialize)]
struct RunOutput {
    options: RunConfig,
    graph: GraphInfo,
    runs: Vec<RunReport<SearchKey>>,
    /// Present only with `--timing`.
    benchmark: Option<BenchmarkReport>,
}

fn strip_timing(run: &mut BfsRun) {
    run.elapsed_secs = 0.0;
    run.teps = 0.0;
    run.phases = PhaseTimes::default();
}

fn cmd_run(cfg: &RunConfig, timing: bool) -> Result<()> {
    let loaded = load_partitioned(cfg)?;
    let opts = cfg.bfs_options()?;
    let keys = search_keys(cfg, &loaded, 1)?;
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    for &s in &keys {
        let mut run = run_bfs(&loaded.pg, &opts.with_source(s))?;
        if !timing {
            strip_timing(&mut run);
        }
        reports.push(RunReport::new(SearchKey { source: s }, &run));
        runs.push(run);
    }
    let benchmark = if timing {
        let (kept, trivial): (Vec<_>, Vec<_>) = runs.into_iter().partition(|r| r.iterations > 1);
        Some(summarize(kept, trivial.len())?)
    } else {
        None
    };
    emit_json(
        cfg.out.as_deref(),
        &RunOutput {
            options: RunConfig {
                out: None,
                ..cfg.clone()
            },
            graph: GraphInfo::of(&loaded),
            runs: reports,
            benchmark,
        },
    )
}

fn cmd_memory(cfg: &RunConfig) -> Result<()> {
    let loaded = load_partitioned(cfg)?;
    emit_json(cfg.out.as_deref(), &loaded.pg.memory_footprint())
}

#[derive(Serialize)]
struct SweepRow {
    theta: u64,
    d: usize,
    d_pct: f64,
    e_nn: u64,
    e_nn_pct: f64,
    footprint_bytes: u64,
    teps: Option<f64>,
}

fn cmd_sweep(cfg: &RunConfig, thetas: &[u64], timing: bool) -> Result<()> {
    let (g, _) = load_graph(cfg)?;
    let shape = cfg.shape()?;
    let opts = cfg.bfs_options()?;
    let keys = if timing {
        pick_sources(&compute_out_degrees(&g), cfg.sources.unwrap_or(8), cfg.seed())
    } else {
        Vec::new()
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    for &theta in thetas {
        let (pg, _) = partition(&g, theta, &shape)?;
        let e_nn = pg.kind_count(EdgeKind::Nn);
        let teps = if timing {
            let runs: Vec<BfsRun> = keys
                .iter()
                .map(|&s| run_bfs(&pg, &opts.with_source(s)))
                .collect::<delegate_bfs::Result<_>>()?;
            let (kept, trivial): (Vec<_>, Vec<_>) = runs.into_iter().partition(|r| r.iterations > 1);
            Some(summarize(kept, trivial.len())?.geomean_teps)
        } else {
            None
        };
        writer.serialize(SweepRow {
            theta,
            d: pg.d(),
            d_pct: 100.0 * pg.d() as f64 / pg.n.max(1) as f64,
            e_nn,
            e_nn_pct: 100.0 * e_nn as f64 / pg.m().max(1) as f64,
            footprint_bytes: pg.memory_footprint().total_bytes,
            teps,
        })?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    emit(cfg.out.as_deref(), &bytes)
}

#[derive(Serialize)]
struct WorkloadCheck {
    source: u64,
    total_inspections: u64,
    m_prime: u64,
    delegate_term: f64,
    holds: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    graph: GraphInfo,
    sources: Vec<u64>,
    runs: usize,
    mismatches: usize,
    failures: Vec<String>,
    /// Informational: engine inspections against m' + d p b.
    workload: Vec<WorkloadCheck>,
}

fn cmd_verify(cfg: &RunConfig) -> Result<()> {
    if cfg.partition.is_some() {
        bail!("invalid config: verify needs `graph` or `scale`, not `partition`");
    }
    let loaded = load_partitioned(cfg)?;
    let g = loaded.graph.as_ref().expect("graph loaded");
    let pg = &loaded.pg;
    let mut failures = Vec::new();

    if let Err(e) = pg.check() {
        failures.push(format!("structure: {e}"));
    }
    let mut rebuilt = pg.reconstruct_edges();
    let mut original = g.edges.clone();
    rebuilt.sort_unstable();
    original.sort_unstable();
    if rebuilt != original {
        failures.push("edge multiset differs after partitioning".into());
    }
    let mem = pg.memory_footprint();
    let expected = 8 * mem.n + 8 * mem.d * mem.p + 4 * mem.m + 4 * mem.e_nn;
    if mem.total_bytes != expected {
        failures.push(format!("footprint {} != {expected}", mem.total_bytes));
    }

    let keys = search_keys(cfg, &loaded, 8)?;
    let base = cfg.bfs_options()?;
    let modes = match cfg.mode {
        Some(m) => vec![m],
        None => vec![Mode::Bfs, Mode::Dobfs],
    };
    let dd = base.factors.dd;
    let mut runs = 0;
    let mut mismatches = 0;
    let mut workload = Vec::new();
    for &s in &keys {
        let expected = reference_bfs(g, s);
        for &mode in &modes {
            let opts = delegate_bfs::engine::BfsOptions {
                mode,
                ..base.with_source(s)
            };
            let run = run_bfs(pg, &opts)?;
            runs += 1;
            if run.levels != expected {
                mismatches += 1;
                failures.push(format!("levels differ from the reference for source {s} in {mode:?}"));
            }
            if mode == Mode::Dobfs {
                let m_prime = oracle_dobfs_inspections(g, s, dd.factor0, dd.factor1);
                let delegate_term = pg.d() as f64 * pg.p() as f64 * run.b;
                let total = run.total_inspections();
                workload.push(WorkloadCheck {
                    source: s,
                    total_inspections: total,
                    m_prime,
                    delegate_term,
                    holds: total as f64 <= m_prime as f64 + delegate_term + 1e-6,
                });
            }
        }
    }
    let report = VerifyReport {
        graph: GraphInfo::of(&loaded),
        sources: keys,
        runs,
        mismatches,
        failures,
        workload,
    };
    emit_json(cfg.out.as_deref(), &report)?;
    if !report.failures.is_empty() {
        bail!("verification failed: {}", report.failures.join("; "));
    }
    Ok(())
}

fn cmd_cost(cfg: &RunConfig, args: &CostArgs) -> Result<()> {
    if args.bandwidth <= 0.0 {
        bail!("invalid field `bandwidth`: must be positive");
    }
    let mut template = WeakScaling {
        vertices_per_worker: (1u64 << args.worker_scale) as f64,
        edge_factor: args.edge_factor_doubled,
        p_gpu: args.p_gpu,
        g: 1.0 / args.bandwidth,
        ..WeakScaling::typical()
    };
    // With a graph configured, S, S_b, the forward share and the nn share
    // come from a DOBFS run on it; otherwise the built-in template is used.
    if cfg.graph.is_some() || cfg.partition.is_some() || cfg.scale.is_some() {
        let loaded = load_partitioned(cfg)?;
        let keys = search_keys(cfg, &loaded, 1)?;
        let run = run_bfs(&loaded.pg, &cfg.bfs_options()?.with_source(keys[0]))?;
        let measured = CostModelParams::from_run(&loaded.pg, &run, template.g);
        template.s = measured.s;
        template.s_b = measured.s_b;
        template.forward_share = measured.n_t / measured.n.max(1.0);
        template.nn_share = measured.e_nn / measured.m.max(1.0);
    }
    let rows = weak_scaling_sweep(&template, &args.p_list)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    emit(cfg.out.as_deref(), &bytes)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DELEGATE_BFS_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("DELEGATE_BFS_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| dispatch(&cli)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(c) => cmd_generate(&c.resolve()?),
        Command::Partition(c) => cmd_partition(&c.resolve()?),
        Command::Run { common, timing } => cmd_run(&common.resolve()?, *timing),
        Command::Memory(c) => cmd_memory(&c.resolve()?),
        Command::Sweep { common, thetas, timing } => cmd_sweep(&common.resolve()?, thetas, *timing),
        Command::Verify(c) => cmd_verify(&c.resolve()?),
        Command::Cost { common, cost } => cmd_cost(&common.resolve()?, cost),
    }
}
