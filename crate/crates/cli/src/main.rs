//! Command-line driver: stream replay through the fully dynamic sparsifier,
//! verification against the brute-force oracles, benchmark sweeps, and
//! direct oracle queries. Reports are single newline-terminated JSON
//! documents with a stable schema (`schema_version`).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hypersparse::fulldyn::BucketArray;
use hypersparse::hypergraph::{gaussian_probes, is_spectral_sparsifier, EdgeId, Hypergraph};
use hypersparse::multigraph::build_associated_graph;
use hypersparse::oracle::effective_resistance;
use hypersparse::sparsify::{Mode, SparsifyParams};
use hypersparse::stream::{parse_stream, UpdateEvent};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "hypersparse", about = "dynamic spectral hypergraph sparsification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay an update stream and report sparsifier statistics.
    Run(RunArgs),
    /// Replay a stream, checking oracle invariants after every event.
    Verify(VerifyArgs),
    /// Sweep random instances of doubling size and fit scaling trends.
    Bench(BenchArgs),
    /// Brute-force leverage report for a small instance.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Update stream file (format: `+ w v1 v2 ...` / `- id` / `#` comments).
    #[arg(long)]
    stream: PathBuf,
    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Vertex count; inferred from the stream when absent.
    #[arg(long)]
    n: Option<usize>,
    /// Insertion capacity; defaults to the stream's insert count.
    #[arg(long)]
    m_cap: Option<u64>,
    /// Rank bound; inferred from the stream when absent.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c_gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    m_star: Option<usize>,
    /// `theory` or `practical`.
    #[arg(long)]
    mode: Option<String>,
    /// Practical-mode bundle-size divisor.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    deletion_cap: Option<u64>,
    #[arg(long)]
    spanner_k: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Include wall-clock timings (breaks byte-for-byte determinism).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Probe vectors per spectral check (>= 1).
    #[arg(long)]
    probes: Option<usize>,
    /// Corrupt one sparsifier weight at this 0-based step, to prove the
    /// validators catch it.
    #[arg(long)]
    inject_fault: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated vertex counts, e.g. 64,128,256,512.
    #[arg(long, default_value = "64,128,256,512")]
    n_series: String,
    /// Edges per vertex (m = factor * n).
    #[arg(long, default_value_t = 4)]
    m_factor: usize,
    #[arg(long, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    stream: PathBuf,
    #[arg(long)]
    n: Option<usize>,
}

/// TOML config file shape; every field optional, flags take precedence.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    seed: Option<u64>,
    n: Option<usize>,
    m_cap: Option<u64>,
    r: Option<usize>,
    eps: Option<f64>,
    gamma: Option<f64>,
    c_gamma: Option<f64>,
    c: Option<f64>,
    rho: Option<f64>,
    m_star: Option<usize>,
    mode: Option<String>,
    scale: Option<f64>,
    deletion_cap: Option<u64>,
    spanner_k: Option<usize>,
    probes: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    seed: u64,
    n: usize,
    m_cap: u64,
    r: usize,
    eps: f64,
    gamma: f64,
    c_gamma: Option<f64>,
    c: f64,
    rho: f64,
    m_star: usize,
    mode: String,
    scale: f64,
    deletion_cap: u64,
    spanner_k: Option<usize>,
}

enum CliError {
    Usage(String),
    VerifyFail(String),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(usage)?;
            toml::from_str(&text).map_err(usage)
        }
    }
}

fn resolve_config(
    opts: &CommonOpts,
    file: &FileConfig,
    events: &[UpdateEvent],
) -> Result<RunConfig, CliError> {
    let inserts = events.iter().filter(|e| matches!(e, UpdateEvent::Insert { .. })).count() as u64;
    let max_vertex = events
        .iter()
        .filter_map(|e| match e {
            UpdateEvent::Insert { verts, .. } => verts.iter().max().copied(),
            _ => None,
        })
        .max();
    let max_arity = events
        .iter()
        .filter_map(|e| match e {
            UpdateEvent::Insert { verts, .. } => Some(verts.len()),
            _ => None,
        })
        .max();

    let n = opts
        .n
        .or(file.n)
        .or(max_vertex.map(|v| v as usize + 1))
        .ok_or_else(|| CliError::Usage("cannot infer n from an empty stream; pass --n".into()))?;
    let gamma = opts.gamma.or(file.gamma).unwrap_or(1.0);
    let cap_limit = (n as f64).powf(gamma).floor() as u64;
    let deletion_cap = opts.deletion_cap.or(file.deletion_cap).unwrap_or(cap_limit);
    if deletion_cap > cap_limit {
        return Err(CliError::Usage(format!(
            "deletion cap {deletion_cap} exceeds n^gamma = {cap_limit}"
        )));
    }
    let mode = opts.mode.clone().or(file.mode.clone()).unwrap_or_else(|| "practical".into());
    if mode != "practical" && mode != "theory" {
        return Err(CliError::Usage(format!("unknown mode '{mode}'")));
    }
    Ok(RunConfig {
        seed: opts.seed.or(file.seed).unwrap_or(0),
        n,
        m_cap: opts.m_cap.or(file.m_cap).unwrap_or(inserts.max(1)),
        r: opts.r.or(file.r).or(max_arity).unwrap_or(2).max(2),
        eps: opts.eps.or(file.eps).unwrap_or(0.5),
        gamma,
        c_gamma: opts.c_gamma.or(file.c_gamma),
        c: opts.c.or(file.c).unwrap_or(1.0),
        rho: opts.rho.or(file.rho).unwrap_or(4.0),
        m_star: opts.m_star.or(file.m_star).unwrap_or(n),
        mode,
        scale: opts.scale.or(file.scale).unwrap_or(1.0),
        deletion_cap,
        spanner_k: opts.spanner_k.or(file.spanner_k),
    })
}

fn sparsify_params(cfg: &RunConfig) -> SparsifyParams {
    SparsifyParams {
        eps: cfg.eps,
        gamma: cfg.gamma,
        c_gamma: cfg.c_gamma,
        c: cfg.c,
        rho: cfg.rho,
        m_star: cfg.m_star.max(cfg.n),
        mode: match cfg.mode.as_str() {
            "theory" => Mode::Theory,
            _ => Mode::Practical { scale: cfg.scale },
        },
        alpha_override: None,
        spanner_k: cfg.spanner_k,
    }
}

fn build_engine(cfg: &RunConfig) -> BucketArray {
    BucketArray::new(cfg.n, cfg.r, cfg.m_cap, cfg.deletion_cap, sparsify_params(cfg), cfg.seed)
}

fn sparsifier_snapshot(engine: &BucketArray) -> BTreeMap<EdgeId, f64> {
    engine.current_sparsifier().edges().map(|(id, e)| (id, e.weight)).collect()
}

#[derive(Serialize)]
struct RecourseSummary {
    total_added: u64,
    total_removed: u64,
    total_reweighted: u64,
    max_per_update: u64,
}

#[derive(Serialize)]
struct RunReport {
    schema_version: u32,
    status: String,
    updates: usize,
    inserts: usize,
    deletes: usize,
    final_live_size: usize,
    final_sparsifier_size: usize,
    recourse: RecourseSummary,
    total_ops: u64,
    amortized_ops: f64,
    bucket_rebuilds: Vec<u64>,
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_seconds: Option<f64>,
}

fn cmd_run(args: &RunArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.common.stream).map_err(usage)?;
    let events = parse_stream(&text).map_err(usage)?;
    let file = load_file_config(&args.common.config)?;
    let cfg = resolve_config(&args.common, &file, &events)?;
    let start = std::time::Instant::now();

    let mut engine = build_engine(&cfg);
    let mut recourse = RecourseSummary {
        total_added: 0,
        total_removed: 0,
        total_reweighted: 0,
        max_per_update: 0,
    };
    let mut inserts = 0usize;
    let mut deletes = 0usize;
    let mut snapshot = sparsifier_snapshot(&engine);
    for ev in &events {
        match ev {
            UpdateEvent::Insert { weight, verts } => {
                engine.insert(verts, *weight).map_err(usage)?;
                inserts += 1;
            }
            UpdateEvent::Delete { id } => {
                engine.delete(*id).map_err(usage)?;
                deletes += 1;
            }
        }
        let now = sparsifier_snapshot(&engine);
        let mut step = 0u64;
        for (id, w) in &now {
            match snapshot.get(id) {
                None => {
                    recourse.total_added += 1;
                    step += 1;
                }
                Some(old) if old != w => {
                    recourse.total_reweighted += 1;
                    step += 1;
                }
                _ => {}
            }
        }
        for id in snapshot.keys() {
            if !now.contains_key(id) {
                recourse.total_removed += 1;
                step += 1;
            }
        }
        recourse.max_per_update = recourse.max_per_update.max(step);
        snapshot = now;
    }

    let total_ops = engine.op_count();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        updates: events.len(),
        inserts,
        deletes,
        final_live_size: engine.m(),
        final_sparsifier_size: snapshot.len(),
        recourse,
        total_ops,
        amortized_ops: if events.is_empty() { 0.0 } else { total_ops as f64 / events.len() as f64 },
        bucket_rebuilds: (1..=engine.k()).map(|i| engine.rebuild_count(i)).collect(),
        config: cfg,
        wall_clock_seconds: args.timings.then(|| start.elapsed().as_secs_f64()),
    };
    Ok(serde_json::to_string(&report).expect("serializable report"))
}

#[derive(Serialize)]
struct VerifyReport {
    schema_version: u32,
    status: String,
    events: usize,
    probes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    /// Replay the first `events_prefix` stream lines with this seed to
    /// reproduce a failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    events_prefix: Option<usize>,
    seed: u64,
}

fn validate_structures(engine: &BucketArray) -> Result<(), String> {
    engine.validate_buckets()?;
    for (bucket, chain) in engine.chains() {
        for (class, sub) in chain.classes() {
            for (li, level) in sub.levels().iter().enumerate() {
                let ctx = format!("bucket {bucket} class {class} level {li}");
                level.bundle.validate_partition().map_err(|e| format!("{ctx}: {e}"))?;
                level.bundle.validate_spanners().map_err(|e| format!("{ctx}: {e}"))?;
            }
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.common.stream).map_err(usage)?;
    let events = parse_stream(&text).map_err(usage)?;
    let file = load_file_config(&args.common.config)?;
    let cfg = resolve_config(&args.common, &file, &events)?;
    let probes = args.probes.or(file.probes).unwrap_or(64);
    if probes == 0 {
        return Err(CliError::Usage("probes >= 1 required for verification".into()));
    }
    if cfg.n > 50 {
        return Err(CliError::Usage(format!(
            "n = {} exceeds oracle capacity 50; verify a smaller instance",
            cfg.n
        )));
    }

    let mut engine = build_engine(&cfg);
    for (step, ev) in events.iter().enumerate() {
        match ev {
            UpdateEvent::Insert { weight, verts } => {
                engine.insert(verts, *weight).map_err(usage)?;
            }
            UpdateEvent::Delete { id } => {
                engine.delete(*id).map_err(usage)?;
            }
        }
        let fail = |reason: String| {
            let report = VerifyReport {
                schema_version: SCHEMA_VERSION,
                status: "fail".into(),
                events: events.len(),
                probes,
                failed_step: Some(step),
                reason: Some(reason),
                events_prefix: Some(step + 1),
                seed: cfg.seed,
            };
            CliError::VerifyFail(serde_json::to_string(&report).expect("serializable report"))
        };

        if let Err(e) = validate_structures(&engine) {
            return Err(fail(format!("structure invariant: {e}")));
        }
        let live = engine.live_hypergraph();
        let mut spars = engine.current_sparsifier();
        if args.inject_fault == Some(step) {
            let first = spars.edge_ids().next();
            if let Some(id) = first {
                let e = spars.edge(id).unwrap().clone();
                spars.delete_hyperedge(id).unwrap();
                spars.insert_with_id(id, &e.verts, e.weight * 10.0).unwrap();
            }
        }
        let xs = gaussian_probes(cfg.n, probes, cfg.seed ^ (step as u64).wrapping_mul(0x9e3779b9));
        let rep = is_spectral_sparsifier(&live, &spars, cfg.eps, &xs);
        if !rep.ok {
            return Err(fail(format!("spectral check: worst ratio deviation {}", rep.worst_ratio)));
        }
    }
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        status: "pass".into(),
        events: events.len(),
        probes,
        failed_step: None,
        reason: None,
        events_prefix: None,
        seed: cfg.seed,
    };
    Ok(serde_json::to_string(&report).expect("serializable report"))
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    m: usize,
    updates: usize,
    total_ops: u64,
    amortized_ops: f64,
    sparsifier_size: usize,
}

#[derive(Serialize)]
struct BenchReport {
    schema_version: u32,
    status: String,
    rows: Vec<BenchRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size_vs_n_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ops_vs_m_slope: Option<f64>,
    warnings: Vec<String>,
}

/// Least-squares slope of y against x on log2-log2 axes.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.max(1.0).log2())).collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

fn bench_cell(n: usize, m: usize, r: usize, seed: u64) -> BenchRow {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let params = SparsifyParams {
        mode: Mode::Practical { scale: 1e6 },
        spanner_k: Some(2),
        rho: 4.0,
        ..SparsifyParams::practical(0.5, 4.0, n)
    };
    let mut engine = BucketArray::new(n, r, m as u64, (n as u64).pow(2), params, seed);
    let mut live: Vec<EdgeId> = Vec::new();
    let mut updates = 0usize;
    for _ in 0..m {
        let arity = rng.gen_range(2..=r);
        let mut verts: Vec<u32> = Vec::new();
        while verts.len() < arity {
            let v = rng.gen_range(0..n as u32);
            if !verts.contains(&v) {
                verts.push(v);
            }
        }
        live.push(engine.insert(&verts, 2f64.powi(rng.gen_range(0..3))).expect("under capacity"));
        updates += 1;
    }
    for _ in 0..m / 4 {
        let idx = rng.gen_range(0..live.len());
        engine.delete(live.swap_remove(idx)).expect("live edge");
        updates += 1;
    }
    BenchRow {
        n,
        m,
        updates,
        total_ops: engine.op_count(),
        amortized_ops: engine.op_count() as f64 / updates as f64,
        sparsifier_size: engine.current_sparsifier().m(),
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<String, CliError> {
    let ns: Vec<usize> = args
        .n_series
        .split(',')
        .map(|s| s.trim().parse().map_err(usage))
        .collect::<Result<_, _>>()?;
    if ns.is_empty() {
        return Err(CliError::Usage("empty n series".into()));
    }
    let rows: Vec<BenchRow> =
        ns.iter().map(|&n| bench_cell(n, n * args.m_factor, args.r, args.seed)).collect();

    let size_pts: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.n as f64, r.sparsifier_size as f64)).collect();
    let ops_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.m as f64, r.amortized_ops)).collect();
    let size_slope = loglog_slope(&size_pts);
    let ops_slope = loglog_slope(&ops_pts);
    let mut warnings = Vec::new();
    if let Some(s) = size_slope {
        if !(0.8..=1.3).contains(&s) {
            warnings.push(format!("sparsifier size vs n slope {s:.3} outside [0.8, 1.3]"));
        }
    }
    if let Some(s) = ops_slope {
        if !(-0.2..=0.4).contains(&s) {
            warnings.push(format!("amortized ops vs m slope {s:.3} outside [-0.2, 0.4]"));
        }
    }
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        rows,
        size_vs_n_slope: size_slope,
        ops_vs_m_slope: ops_slope,
        warnings,
    };
    Ok(serde_json::to_string(&report).expect("serializable report"))
}

#[derive(Serialize)]
struct OracleEdgeRow {
    id: u64,
    arity: usize,
    weight: f64,
    /// max over pairs u,v in the edge of w * R_{G_H}(u, v).
    leverage: f64,
}

#[derive(Serialize)]
struct OracleReport {
    schema_version: u32,
    status: String,
    n: usize,
    m: usize,
    rank: usize,
    max_leverage: f64,
    edges: Vec<OracleEdgeRow>,
}

fn cmd_oracle(args: &OracleArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.stream).map_err(usage)?;
    let events = parse_stream(&text).map_err(usage)?;
    let max_vertex = events
        .iter()
        .filter_map(|e| match e {
            UpdateEvent::Insert { verts, .. } => verts.iter().max().copied(),
            _ => None,
        })
        .max();
    let n = args.n.or(max_vertex.map(|v| v as usize + 1)).unwrap_or(2);
    if n > 50 {
        return Err(CliError::Usage(format!("n = {n} exceeds oracle capacity 50")));
    }
    let max_arity = events
        .iter()
        .filter_map(|e| match e {
            UpdateEvent::Insert { verts, .. } => Some(verts.len()),
            _ => None,
        })
        .max()
        .unwrap_or(2);
    let mut h = Hypergraph::new(n, max_arity.max(2));
    for ev in &events {
        match ev {
            UpdateEvent::Insert { weight, verts } => {
                h.insert_hyperedge(verts, *weight).map_err(usage)?;
            }
            UpdateEvent::Delete { id } => {
                h.delete_hyperedge(*id).map_err(usage)?;
            }
        }
    }
    let g = build_associated_graph(&h);
    let mut edges = Vec::new();
    let mut max_leverage = 0.0f64;
    for (id, e) in h.edges() {
        let mut lev = 0.0f64;
        for i in 0..e.verts.len() {
            for j in i + 1..e.verts.len() {
                let r = effective_resistance(&g, e.verts[i], e.verts[j]).map_err(usage)?;
                lev = lev.max(e.weight * r);
            }
        }
        max_leverage = max_leverage.max(lev);
        edges.push(OracleEdgeRow { id: id.0, arity: e.arity(), weight: e.weight, leverage: lev });
    }
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        n,
        m: h.m(),
        rank: h.rank(),
        max_leverage,
        edges,
    };
    Ok(serde_json::to_string(&report).expect("serializable report"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(CliError::VerifyFail(report)) => {
            println!("{report}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
