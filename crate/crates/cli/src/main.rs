use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, ValueEnum};
use modforce::align::misclassified_nodes;
use modforce::heuristics::{
    cross_cluster_preprocess, heuristic_edge_addition, heuristic_edge_removal, post_process,
    star_lower_bound, Capacity, HeuristicConfig, RemovalRule,
};
use modforce::io::{
    demo_fixture, generate_candidates, largest_component, parse_edge_csv, parse_pajek,
    parse_partition_csv, FixtureName, LabeledGraph, RNG_NAME,
};
use modforce::rowgen::{solve_edge_addition, solve_sparsification, verify_certificate, RowGenConfig};
use modforce::search::{is_optimal, SearchMode, MAX_EXACT_NODES};
use modforce::{
    maximize_modularity, modularity, EdgeDelta, Graph, ModularityValue, Partition, RunStatus,
    SearchConfig, SolveReport,
};
use serde::Serialize;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_LIMIT: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NOT_VERIFIED: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Add,
    Sparsify,
    Verify,
    Demo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Ip,
    IpPlus,
    Heuristic,
    HeuristicPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Pajek,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preprocess {
    None,
    Guarded,
    Bulk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Auto,
    Exact,
    Heuristic,
}

/// Add or remove edges so that a chosen partition maximises modularity.
#[derive(Debug, Parser)]
#[command(name = "modforce", version)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, value_enum, default_value = "heuristic-post")]
    method: Method,
    /// Graph file (Pajek `.net` or `u,v[,w]` CSV).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// `node,cluster` CSV; the graph's own optimum is used when omitted.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Edge delta CSV (`u,v,delta`) to check in verify mode.
    #[arg(long)]
    delta: Option<PathBuf>,
    /// Fixture for demo mode: figure1, figure2 or karate.
    #[arg(long)]
    fixture: Option<String>,
    /// Total number of candidate pairs for the exact methods.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit in seconds for the exact methods.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Search-node limit for each master solve.
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, value_enum, default_value = "auto")]
    backend: Backend,
    /// Largest graph solved by exact enumeration under the auto backend.
    #[arg(long, default_value_t = 12)]
    exact_limit: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Require the ground truth to win by a positive margin.
    #[arg(long)]
    epsilon_strict: bool,
    /// Add or remove single weight units instead of whole edges.
    #[arg(long)]
    weighted: bool,
    /// Per-pair weight cap in weighted mode.
    #[arg(long, default_value_t = 10)]
    capacity: u64,
    /// Removal ordering rule (1-4) for heuristic sparsification.
    #[arg(long, default_value_t = 3)]
    removal_rule: u8,
    #[arg(long, value_enum, default_value = "none")]
    preprocess: Preprocess,
    /// Keep only the largest connected component of the input.
    #[arg(long)]
    largest_component: bool,
    /// Permit exact sparsification beyond the exact-search node limit.
    #[arg(long)]
    force_exact: bool,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// CSV file receiving the edge delta.
    #[arg(long)]
    delta_csv: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn usage(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error,
    }
}

fn data(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        error,
    }
}

#[derive(Debug, Serialize)]
struct DeltaEntry {
    u: String,
    v: String,
    delta: i64,
}

#[derive(Debug, Default, Serialize)]
struct Report {
    mode: String,
    method: Option<Method>,
    input: Option<String>,
    nodes: usize,
    edges: usize,
    total_weight: u64,
    seed: u64,
    rng: &'static str,
    status: String,
    objective: Option<i64>,
    bound: Option<i64>,
    iterations: Option<usize>,
    objective_trace: Vec<i64>,
    pool_size: Option<usize>,
    cut_count: Option<usize>,
    initial_misclassified: Option<usize>,
    star_lower_bound: Option<usize>,
    edges_remaining: Option<u64>,
    preprocess_remaining: Option<u64>,
    q_t_initial: Option<ModularityValue>,
    q_t_final: Option<ModularityValue>,
    q_best_final: Option<ModularityValue>,
    optimal: Option<bool>,
    verification_exact: Option<bool>,
    delta: Vec<DeltaEntry>,
    extra: serde_json::Map<String, serde_json::Value>,
    wall_time_secs: f64,
}

fn main() -> ExitCode {
    let args = match RunArgs::try_parse() {
        Ok(s) => s,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn search_config(args: &RunArgs) -> Result<SearchConfig, Failure> {
    let cfg = SearchConfig {
        mode: match args.backend {
            Backend::Auto => SearchMode::Auto,
            Backend::Exact => SearchMode::Exact,
            Backend::Heuristic => SearchMode::Heuristic,
        },
        exact_n_limit: args.exact_limit,
        seed: args.seed,
        heuristic_restarts: args.restarts,
    };
    cfg.validate().map_err(|e| usage(e.into()))?;
    Ok(cfg)
}

fn load_graph(args: &RunArgs) -> Result<LabeledGraph, Failure> {
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| usage(anyhow!("--input is required for this mode")))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(data)?;
    let format = args.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some("net") | Some("paj") => Format::Pajek,
        _ => Format::Csv,
    });
    let lg = match format {
        Format::Pajek => parse_pajek(&text),
        Format::Csv => parse_edge_csv(&text),
    }
    .with_context(|| format!("parsing {}", path.display()))
    .map_err(data)?;
    if !args.largest_component {
        return Ok(lg);
    }
    let (graph, keep) = largest_component(&lg.graph);
    let labels = keep.iter().map(|&i| lg.labels[i].clone()).collect();
    Ok(LabeledGraph { graph, labels })
}

fn load_truth(args: &RunArgs, lg: &LabeledGraph, search: &SearchConfig) -> Result<Partition, Failure> {
    match &args.ground_truth {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(data)?;
            parse_partition_csv(&text, &lg.labels)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(data)
        }
        None => Ok(maximize_modularity(&lg.graph, search)
            .map_err(|e| data(e.into()))?
            .partition),
    }
}

fn load_delta(path: &Path, lg: &LabeledGraph) -> Result<EdgeDelta, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(data)?;
    let mut delta = EdgeDelta::new();
    for (k, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.iter().all(|f| f.is_empty()) || (k == 0 && fields.first() == Some(&"u")) {
            continue;
        }
        let parse = || -> anyhow::Result<(usize, usize, i64)> {
            if fields.len() != 3 {
                bail!("expected `u,v,delta`");
            }
            let idx = |l: &str| lg.index_of(l).ok_or_else(|| anyhow!("unknown node {l:?}"));
            Ok((idx(fields[0])?, idx(fields[1])?, fields[2].parse()?))
        };
        let (u, v, w) = parse()
            .with_context(|| format!("{} line {}", path.display(), k + 1))
            .map_err(data)?;
        delta.push(u, v, w);
    }
    Ok(delta)
}

fn delta_entries(delta: &EdgeDelta, labels: &[String]) -> Vec<DeltaEntry> {
    delta
        .consolidated()
        .pairs()
        .iter()
        .map(|&(i, j, w)| DeltaEntry {
            u: labels[i].clone(),
            v: labels[j].clone(),
            delta: w,
        })
        .collect()
}

fn status_name(s: RunStatus) -> &'static str {
    match s {
        RunStatus::Optimal => "optimal",
        RunStatus::HeuristicallyVerified => "heuristically_verified",
        RunStatus::Infeasible => "infeasible",
        RunStatus::Limit => "limit",
    }
}

fn exit_for(s: RunStatus) -> u8 {
    match s {
        RunStatus::Optimal | RunStatus::HeuristicallyVerified => 0,
        RunStatus::Infeasible => EXIT_INFEASIBLE,
        RunStatus::Limit => EXIT_LIMIT,
    }
}

fn heuristic_config(args: &RunArgs, search: &SearchConfig) -> Result<HeuristicConfig, Failure> {
    Ok(HeuristicConfig {
        weighted: args.weighted,
        capacity: Capacity::Uniform(args.capacity),
        removal_rule: RemovalRule::from_index(args.removal_rule).map_err(|e| usage(e.into()))?,
        seed: args.seed,
        search: search.clone(),
        max_steps: None,
    })
}

fn rowgen_config(args: &RunArgs, search: &SearchConfig, augmented: bool) -> RowGenConfig {
    let mut cfg = RowGenConfig {
        augmented,
        search: search.clone(),
        master_nodes: args.node_limit,
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        ..Default::default()
    };
    cfg.master_options.strict = args.epsilon_strict;
    cfg
}

fn fill_from_solve(report: &mut Report, r: &SolveReport, labels: &[String]) {
    report.status = status_name(r.status).to_string();
    report.objective = r.objective();
    report.bound = Some(r.bound);
    report.iterations = Some(r.iterations);
    report.objective_trace = r.objective_trace.clone();
    report.pool_size = Some(r.partition_pool.len());
    report.cut_count = Some(r.cut_count);
    report.q_t_final = r.q_t_final;
    report.q_best_final = r.q_best_final;
    report.delta = delta_entries(&r.delta, labels);
}

fn run(args: &RunArgs) -> Result<u8, Failure> {
    let started = Instant::now();
    let search = search_config(args)?;
    let mut report = Report {
        mode: format!("{:?}", args.mode).to_lowercase(),
        seed: args.seed,
        rng: RNG_NAME,
        input: args.input.as_ref().map(|p| p.display().to_string()),
        ..Default::default()
    };
    let mut delta_out: Option<(EdgeDelta, Vec<String>)> = None;
    let code = match args.mode {
        Mode::Demo => run_demo(args, &mut report)?,
        Mode::Verify => {
            let lg = load_graph(args)?;
            describe(&mut report, &lg.graph);
            let t = load_truth(args, &lg, &search)?;
            let delta = match &args.delta {
                Some(p) => load_delta(p, &lg)?,
                None => EdgeDelta::new(),
            };
            let g2 = lg.graph.apply(&delta).map_err(|e| data(e.into()))?;
            let opt = is_optimal(&g2, &t, &search).map_err(|e| data(e.into()))?;
            report.optimal = Some(opt.optimal);
            report.verification_exact = Some(opt.exact);
            report.q_t_final = Some(opt.value);
            report.q_best_final = Some(opt.best);
            report.status = if opt.optimal { "verified" } else { "not_optimal" }.into();
            if opt.optimal {
                0
            } else {
                EXIT_NOT_VERIFIED
            }
        }
        Mode::Add => {
            let lg = load_graph(args)?;
            describe(&mut report, &lg.graph);
            let g = &lg.graph;
            let t = load_truth(args, &lg, &search)?;
            report.method = Some(args.method);
            report.q_t_initial = Some(modularity(g, &t).map_err(|e| data(e.into()))?);
            let base = maximize_modularity(g, &search).map_err(|e| data(e.into()))?;
            report.initial_misclassified = Some(
                misclassified_nodes(&t, &base.partition)
                    .map_err(|e| data(e.into()))?
                    .len(),
            );
            let hcfg = heuristic_config(args, &search)?;
            let (delta, solve) = heuristic_edge_addition(g, &t, &hcfg).map_err(|e| data(e.into()))?;
            let (final_delta, solve) = match args.method {
                Method::Heuristic => (delta, solve),
                Method::HeuristicPost => {
                    let trimmed = if solve.status.is_success() {
                        post_process(g, &t, &delta, &hcfg).map_err(|e| data(e.into()))?
                    } else {
                        delta
                    };
                    (trimmed, solve)
                }
                Method::Ip | Method::IpPlus => {
                    if args.weighted {
                        return Err(usage(anyhow!("the exact methods add unit edges only")));
                    }
                    let seed_delta = if solve.status.is_success() {
                        post_process(g, &t, &delta, &hcfg).map_err(|e| data(e.into()))?
                    } else {
                        EdgeDelta::new()
                    };
                    let budget = args.budget.max(seed_delta.len());
                    let cand = generate_candidates(g, &seed_delta, budget, args.seed)
                        .map_err(|e| data(e.into()))?;
                    let cfg = rowgen_config(args, &search, args.method == Method::IpPlus);
                    let r = solve_edge_addition(g, &t, &cand, &cfg).map_err(|e| data(e.into()))?;
                    report.extra.insert("candidates".into(), cand.len().into());
                    report.extra.insert("heuristic_seed_edges".into(), seed_delta.len().into());
                    (r.delta.clone(), r)
                }
            };
            fill_from_solve(&mut report, &solve, &lg.labels);
            report.delta = delta_entries(&final_delta, &lg.labels);
            if solve.status.is_success() {
                report.objective = Some(final_delta.magnitude() as i64);
                let ok = verify_certificate(g, &t, &final_delta, &search).map_err(|e| data(e.into()))?;
                report.optimal = Some(ok);
                report.verification_exact = Some(search.uses_exact(g.node_count()));
                let g2 = g.apply(&final_delta).map_err(|e| data(e.into()))?;
                report.q_t_final = Some(modularity(&g2, &t).map_err(|e| data(e.into()))?);
            }
            let code = exit_for(solve.status);
            delta_out = Some((final_delta, lg.labels.clone()));
            code
        }
        Mode::Sparsify => {
            let lg = load_graph(args)?;
            describe(&mut report, &lg.graph);
            let g = &lg.graph;
            report.method = Some(args.method);
            let t = maximize_modularity(g, &search).map_err(|e| data(e.into()))?.partition;
            report.star_lower_bound = Some(star_lower_bound(&t));
            report.q_t_initial = Some(modularity(g, &t).map_err(|e| data(e.into()))?);
            let (delta, solve) = match args.method {
                Method::Ip | Method::IpPlus => {
                    if g.node_count() > MAX_EXACT_NODES.min(args.exact_limit) && !args.force_exact {
                        return Err(usage(anyhow!(
                            "exact sparsification is limited to {} nodes; pass --force-exact to try anyway",
                            args.exact_limit
                        )));
                    }
                    let cfg = rowgen_config(args, &search, args.method == Method::IpPlus);
                    let r = solve_sparsification(g, &cfg).map_err(|e| data(e.into()))?;
                    (r.delta.clone(), r)
                }
                Method::Heuristic => {
                    let pre = match args.preprocess {
                        Preprocess::None => EdgeDelta::new(),
                        Preprocess::Guarded => cross_cluster_preprocess(g, &t, &search, false)
                            .map_err(|e| data(e.into()))?,
                        Preprocess::Bulk => cross_cluster_preprocess(g, &t, &search, true)
                            .map_err(|e| data(e.into()))?,
                    };
                    let reduced = g.apply(&pre).map_err(|e| data(e.into()))?;
                    report.preprocess_remaining = Some(reduced.total_weight());
                    let hcfg = heuristic_config(args, &search)?;
                    let (removed, r) = heuristic_edge_removal(&reduced, &t, &hcfg).map_err(|e| data(e.into()))?;
                    let mut all = pre;
                    all.extend(&removed);
                    (all, r)
                }
                Method::HeuristicPost => {
                    return Err(usage(anyhow!("heuristic-post applies to add mode only")));
                }
            };
            fill_from_solve(&mut report, &solve, &lg.labels);
            report.delta = delta_entries(&delta, &lg.labels);
            if solve.status.is_success() {
                let g2 = g.apply(&delta).map_err(|e| data(e.into()))?;
                report.edges_remaining = Some(g2.total_weight());
                report.objective = Some(g2.total_weight() as i64);
                report.optimal = Some(verify_certificate(g, &t, &delta, &search).map_err(|e| data(e.into()))?);
                report.verification_exact = Some(search.uses_exact(g.node_count()));
            }
            delta_out = Some((delta, lg.labels.clone()));
            exit_for(solve.status)
        }
    };
    report.wall_time_secs = started.elapsed().as_secs_f64();
    write_outputs(args, &report, delta_out)?;
    Ok(code)
}

fn describe(report: &mut Report, g: &Graph) {
    report.nodes = g.node_count();
    report.edges = g.edges().len();
    report.total_weight = g.total_weight();
}

fn run_demo(args: &RunArgs, report: &mut Report) -> Result<u8, Failure> {
    let name: FixtureName = args
        .fixture
        .as_deref()
        .ok_or_else(|| usage(anyhow!("--fixture is required in demo mode")))?
        .parse()
        .map_err(|e: modforce::Error| usage(e.into()))?;
    let fx = demo_fixture(name).map_err(|e| data(e.into()))?;
    let g = &fx.graph.graph;
    describe(report, g);
    let q = modularity(g, &fx.partition).map_err(|e| data(e.into()))?;
    report.q_t_initial = Some(q);
    report.status = "ok".into();
    report.extra.insert("fixture".into(), serde_json::to_value(name).expect("serialisable"));
    report.extra.insert(
        "clusters".into(),
        serde_json::to_value(
            fx.partition
                .clusters()
                .iter()
                .map(|c| c.iter().map(|&i| fx.graph.labels[i].clone()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
        .expect("serialisable"),
    );
    match name {
        FixtureName::Figure2 => {
            let red = EdgeDelta::from_pairs([(12, 15, 1)]);
            let g2 = g.apply(&red).map_err(|e| data(e.into()))?;
            let q2 = modularity(&g2, &fx.partition).map_err(|e| data(e.into()))?;
            report.q_t_final = Some(q2);
            report.delta = delta_entries(&red, &fx.graph.labels);
        }
        FixtureName::Figure1 => {
            let mut values = Vec::new();
            for (i, j) in within_cluster_non_edges(g, &fx.partition) {
                let g2 = g.apply(&EdgeDelta::from_pairs([(i, j, 1)])).map_err(|e| data(e.into()))?;
                values.push(modularity(&g2, &fx.partition).map_err(|e| data(e.into()))?.to_f64());
            }
            values.sort_by(f64::total_cmp);
            values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            report.extra.insert(
                "within_cluster_addition_q".into(),
                serde_json::to_value(values).expect("serialisable"),
            );
        }
        FixtureName::Karate => {}
    }
    Ok(0)
}

fn within_cluster_non_edges(g: &Graph, p: &Partition) -> Vec<(usize, usize)> {
    let n = g.node_count();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| p.same_cluster(i, j) && !g.is_adjacent(i, j))
        .collect()
}

fn write_outputs(
    args: &RunArgs,
    report: &Report,
    delta: Option<(EdgeDelta, Vec<String>)>,
) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).map_err(|e| data(e.into()))?;
    match &args.output {
        Some(path) => std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{json}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(data(e.into()));
                }
            }
        }
    }
    if let (Some(path), Some((delta, labels))) = (&args.delta_csv, delta) {
        let mut out = String::from("u,v,delta\n");
        for e in delta_entries(&delta, &labels) {
            out.push_str(&format!("{},{},{}\n", e.u, e.v, e.delta));
        }
        std::fs::write(path, out)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(data)?;
    }
    Ok(())
}
