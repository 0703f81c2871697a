//! Command-line front end for contactnet experiments.
//!
//! Every run writes `manifest.json` into the output directory before any
//! work starts, then `results.jsonl` and command-specific files. Replaying a
//! manifest (`--config <dir>/manifest.json`) reproduces every output except
//! the manifest's `created_at`.

pub mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use contactnet::degrees::{
    power_law_pmf, size_biased_mean, DegreePmf, DegreeSampler, DegreesError,
};
use contactnet::dynamics::{
    duality_gap, exact_survival_tiny, run_dual, run_forward, run_star_chain, uniform_schedule,
    DynamicsError, StarChain, StarRunConfig, ORACLE_MAX_VERTICES,
};
use contactnet::estimators::{
    default_rho_horizon, diameter_scaling_check, estimate_rho, fit_exponent, EstimatorError,
    SurvivalEstimate, Z_95,
};
use contactnet::graph::{random_graph, Graph, GraphError, DEFAULT_MAX_RETRIES};
use contactnet::records::Record;
use contactnet::seed::{derive_seed, replicate_rng, rng_from_seed};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use config::{parse_config, Command, ExperimentConfig, Parsed};

pub const MANIFEST: &str = "manifest.json";
pub const RESULTS: &str = "results.jsonl";
pub const GRAPH_FILE: &str = "graph.txt";
pub const TRAJECTORY_DIR: &str = "trajectories";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 2 usage, 3 precondition, 4 resource limit, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::SimplicityUnreachable { .. }
            | GraphError::Degrees(DegreesError::ResampleLimitExceeded { .. }) => {
                CliError::Resource(e.to_string())
            }
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<DegreesError> for CliError {
    fn from(e: DegreesError) -> Self {
        GraphError::from(e).into()
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::TooLarge { .. } => CliError::Resource(e.to_string()),
            DynamicsError::Graph(g) => g.into(),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Degrees(d) => d.into(),
            EstimatorError::Graph(g) => g.into(),
            EstimatorError::Dynamics(d) => d.into(),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Precondition(e.to_string())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    code_version: &'a str,
    config: &'a ExperimentConfig,
    warnings: &'a [String],
    created_at: u64,
}

/// Parses `argv`, runs the experiment, and returns the process exit code.
/// Errors go to stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = parse_config(argv).and_then(|parsed| {
        for w in &parsed.warnings {
            eprintln!("warning: {w}");
        }
        run_experiment(&parsed)
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("contactnet: {e}");
            e.exit_code()
        }
    }
}

/// Writes the manifest, then dispatches on the command inside a pool of
/// `workers` threads.
pub fn run_experiment(parsed: &Parsed) -> Result<(), CliError> {
    let cfg = &parsed.config;
    let out = &cfg.output_path;
    fs::create_dir_all(out)?;
    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        warnings: &parsed.warnings,
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Resource(format!("thread pool: {e}")))?;
    let records = pool.install(|| match cfg.command {
        Command::GenGraph => gen_graph(cfg),
        Command::Simulate => simulate(cfg),
        Command::Star => star(cfg),
        Command::RhoScan => rho_scan(cfg),
        Command::FitBeta => fit_beta(cfg),
        Command::Diameter => diameter_scan(cfg),
        Command::DualityCheck => duality_check(cfg),
        Command::OracleCheck => oracle_check(cfg),
    })?;
    let mut w = BufWriter::new(fs::File::create(out.join(RESULTS))?);
    for r in &records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;
    Ok(())
}

fn record<P: Serialize, T: Serialize>(
    cfg: &ExperimentConfig,
    params: &P,
    seed: u64,
    result: &T,
) -> Result<Record, CliError> {
    Ok(Record::new(cfg.command.name(), params, seed, result)?)
}

fn degree_pmf(cfg: &ExperimentConfig) -> Result<DegreePmf<f64>, CliError> {
    Ok(power_law_pmf(cfg.alpha, cfg.k_min, cfg.k_max)?)
}

/// The graph for this run: the `--graph` file, or a sample from stream 0.
fn load_or_sample_graph(cfg: &ExperimentConfig) -> Result<(Graph, Value), CliError> {
    if let Some(path) = &cfg.graph {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("graph: cannot read {}: {e}", path.display())))?;
        let g = Graph::from_edge_list(&text)?;
        let info = json!({"source": path, "n": g.n(), "edges": g.edge_count()});
        return Ok((g, info));
    }
    let pmf = degree_pmf(cfg)?;
    let sampler = DegreeSampler::new(&pmf);
    let mut rng = rng_from_seed(derive_seed(cfg.master_seed, 0));
    let sample = random_graph(&sampler, cfg.n, &mut rng, DEFAULT_MAX_RETRIES)?;
    let g = sample.graph;
    let info = json!({
        "n": g.n(),
        "edges": g.edge_count(),
        "max_degree": g.max_degree(),
        "retries": sample.retries,
        "parity_resamples": sample.parity_resamples,
    });
    Ok((g, info))
}

fn initial_set(cfg: &ExperimentConfig, n: usize) -> Result<Vec<usize>, CliError> {
    // Only a loaded graph can get here with a bad vertex.
    let set = config::parse_initial(&cfg.initial, n).map_err(|e| match e {
        CliError::Usage(msg) => CliError::Precondition(msg),
        e => e,
    })?;
    Ok(set.unwrap_or_else(|| (0..n).collect()))
}

fn gen_graph(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let (g, info) = load_or_sample_graph(cfg)?;
    fs::write(cfg.output_path.join(GRAPH_FILE), g.to_edge_list())?;
    let pmf = degree_pmf(cfg)?;
    let degrees = g.degrees();
    let sum: usize = degrees.iter().sum();
    let sum_sq: usize = degrees.iter().map(|d| d * (d - 1)).sum();
    let result = json!({
        "graph": info,
        "realized_nu": if sum > 0 { sum_sq as f64 / sum as f64 } else { 0.0 },
        "nu": size_biased_mean(&pmf),
    });
    let params = json!({"alpha": cfg.alpha, "k_min": cfg.k_min, "k_max": cfg.k_max, "n": cfg.n});
    Ok(vec![record(cfg, &params, derive_seed(cfg.master_seed, 0), &result)?])
}

fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let (g, info) = load_or_sample_graph(cfg)?;
    let initial = initial_set(cfg, g.n())?;
    let horizon = cfg.horizon.unwrap_or(100.0);
    let times = uniform_schedule(horizon, cfg.samples);
    let trajectories = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(derive_seed(cfg.master_seed, 1), i);
            run_forward(&g, cfg.lambda, &initial, horizon, &times, cfg.epsilon, &mut rng)
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;

    let dir = cfg.output_path.join(TRAJECTORY_DIR);
    fs::create_dir_all(&dir)?;
    let stream = derive_seed(cfg.master_seed, 1);
    let mut records = Vec::with_capacity(trajectories.len() + 1);
    for (i, t) in trajectories.iter().enumerate() {
        fs::write(dir.join(format!("{i:05}.csv")), t.to_csv())?;
        let params = json!({"replicate": i, "lambda": cfg.lambda, "horizon": horizon});
        let result = json!({
            "extinction_time": t.extinction_time,
            "final_infected": t.final_infected(),
        });
        records.push(record(cfg, &params, derive_seed(stream, i as u64), &result)?);
    }
    let extinct = trajectories.iter().filter(|t| t.extinction_time.is_some()).count();
    let params = json!({
        "lambda": cfg.lambda,
        "horizon": horizon,
        "reps": cfg.reps,
        "initial": cfg.initial,
        "graph": info,
    });
    let result = json!({
        "extinct": extinct,
        "survival": SurvivalEstimate::from_counts((cfg.reps - extinct) as u64, cfg.reps as u64, Z_95)?,
    });
    records.push(record(cfg, &params, cfg.master_seed, &result)?);
    Ok(records)
}

fn star(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let horizon = cfg
        .horizon
        .unwrap_or_else(|| (cfg.k as f64 * cfg.lambda * cfg.lambda / 10.0).exp());
    let start = StarChain::new(cfg.k, cfg.m, true)?;
    let run_cfg = StarRunConfig::until(horizon);
    let stream = derive_seed(cfg.master_seed, 1);
    let runs = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| run_star_chain(cfg.lambda, start, &run_cfg, &mut replicate_rng(stream, i)))
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    let mut records = Vec::with_capacity(runs.len() + 1);
    for (i, r) in runs.iter().enumerate() {
        let params = json!({"replicate": i});
        let result = json!({
            "survived": r.survived,
            "stopped_at": r.stopped_at,
            "min_infected_leaves": r.min_infected_leaves,
            "center_recovery_time": r.center_recovery_time,
        });
        records.push(record(cfg, &params, derive_seed(stream, i as u64), &result)?);
    }
    let survived = runs.iter().filter(|r| r.survived).count() as u64;
    let params = json!({
        "k": cfg.k, "m": cfg.m, "lambda": cfg.lambda, "horizon": horizon, "reps": cfg.reps,
    });
    let result = SurvivalEstimate::from_counts(survived, cfg.reps as u64, Z_95)?;
    records.push(record(cfg, &params, cfg.master_seed, &result)?);
    Ok(records)
}

fn rho_scan(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let (g, info) = load_or_sample_graph(cfg)?;
    let mut records = Vec::new();
    let mut points = Vec::new();
    for (j, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let horizon = cfg
            .horizon
            .unwrap_or_else(|| default_rho_horizon(lambda, cfg.alpha));
        let seed = derive_seed(cfg.master_seed, 1 + j as u64);
        let est = estimate_rho(&g, lambda, horizon, cfg.sample_size, seed)?;
        for r in &est.replicates {
            let params = json!({"lambda": lambda, "replicate": r.index});
            let result = json!({"vertex": r.vertex, "survived": r.survived});
            records.push(record(cfg, &params, derive_seed(seed, r.index), &result)?);
        }
        let params = json!({
            "lambda": lambda,
            "horizon": horizon,
            "sample_size": cfg.sample_size,
            "graph": info,
        });
        let e = &est.estimate;
        let result = json!({
            "rho": e.p_hat,
            "ci_low": e.ci_low,
            "ci_high": e.ci_high,
            "successes": e.successes,
            "trials": e.trials,
        });
        records.push(record(cfg, &params, seed, &result)?);
        points.push((lambda, e.p_hat));
    }
    records.push(fit_record(cfg, &points)?);
    Ok(records)
}

/// Fit over the positive points; a record with `beta_hat: null` and the
/// reason when fewer than three remain.
fn fit_record(cfg: &ExperimentConfig, points: &[(f64, f64)]) -> Result<Record, CliError> {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    let params = json!({"points": points, "alpha": cfg.alpha});
    let result = match fit_exponent(&usable) {
        Ok(fit) => json!({
            "beta_hat": fit.beta_hat,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "stderr_beta": fit.stderr_beta,
            "points_used": usable.len(),
            "bracket": [cfg.alpha - 1.0, 2.0 * cfg.alpha - 3.0],
        }),
        Err(e) => json!({"beta_hat": null, "points_used": usable.len(), "error": e.to_string()}),
    };
    record(cfg, &params, cfg.master_seed, &result)
}

/// `(lambda, rho)` from the summary lines of a rho-scan results file.
pub fn read_rho_points(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("input: cannot read {}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line)
            .map_err(|e| CliError::Usage(format!("input: line {}: {e}", i + 1)))?;
        let lambda = v["params"]["lambda"].as_f64();
        let rho = v["result"]["rho"].as_f64();
        if let (Some(l), Some(r)) = (lambda, rho) {
            points.push((l, r));
        }
    }
    Ok(points)
}

fn fit_beta(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let mut points = match &cfg.points {
        Some(p) => config::parse_points(p)?,
        None => Vec::new(),
    };
    if let Some(path) = &cfg.input {
        points.extend(read_rho_points(path)?);
    }
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    fit_exponent(&usable)?;
    Ok(vec![fit_record(cfg, &points)?])
}

fn diameter_scan(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let pmf = degree_pmf(cfg)?;
    let nu = size_biased_mean(&pmf);
    let rows = diameter_scaling_check(&pmf, &cfg.n_grid, cfg.reps, cfg.slack, cfg.master_seed)?;
    let mut records = Vec::new();
    for row in &rows {
        for s in &row.graphs {
            let params = json!({"n": row.n, "index": s.index});
            records.push(record(cfg, &params, derive_seed(cfg.master_seed, s.index), s)?);
        }
        let params = json!({
            "n": row.n,
            "samples": row.samples,
            "alpha": cfg.alpha,
            "k_min": cfg.k_min,
            "k_max": cfg.k_max,
            "slack": cfg.slack,
            "nu": nu,
        });
        let result = json!({
            "connected_fraction": row.connected_fraction,
            "mean_diameter": row.mean_diameter,
            "max_diameter": row.max_diameter,
            "bound": row.bound,
            "fraction_within": row.fraction_within,
            "bound_applicable": row.bound_applicable,
        });
        records.push(record(cfg, &params, cfg.master_seed, &result)?);
    }
    Ok(records)
}

/// Random non-empty vertex subset.
fn random_subset<G: Rng + ?Sized>(n: usize, rng: &mut G) -> Vec<usize> {
    loop {
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !set.is_empty() {
            return set;
        }
    }
}

/// Erdos-Renyi graph with edge probability 1/2.
fn random_small_graph<G: Rng + ?Sized>(n: usize, rng: &mut G) -> Result<Graph, CliError> {
    let mut edges = Vec::new();
    for u in 0..n {
        for w in u + 1..n {
            if rng.random_bool(0.5) {
                edges.push((u, w));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges)?)
}

fn check_oracle_size(n: usize) -> Result<(), CliError> {
    if n > ORACLE_MAX_VERTICES {
        return Err(DynamicsError::TooLarge {
            n,
            max: ORACLE_MAX_VERTICES,
        }
        .into());
    }
    Ok(())
}

fn duality_check(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    check_oracle_size(cfg.n)?;
    let t = cfg.horizon.unwrap_or(1.0);
    let rows = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let mut rng = replicate_rng(cfg.master_seed, i);
            let g = random_small_graph(cfg.n, &mut rng)?;
            let a = random_subset(cfg.n, &mut rng);
            let b = random_subset(cfg.n, &mut rng);
            let gap = duality_gap(&g, cfg.lambda, &a, &b, t)?;
            Ok((g.edge_count(), a, b, gap))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut records = Vec::with_capacity(rows.len() + 1);
    let mut max_gap = 0.0f64;
    for (i, (edges, a, b, gap)) in rows.iter().enumerate() {
        max_gap = max_gap.max(gap.abs_gap);
        let params = json!({"replicate": i, "n": cfg.n, "edges": edges, "a": a, "b": b});
        records.push(record(cfg, &params, derive_seed(cfg.master_seed, i as u64), gap)?);
    }
    let params = json!({"n": cfg.n, "lambda": cfg.lambda, "t": t, "graphs": cfg.reps});
    records.push(record(cfg, &params, cfg.master_seed, &json!({"max_gap": max_gap}))?);
    Ok(records)
}

fn oracle_check(cfg: &ExperimentConfig) -> Result<Vec<Record>, CliError> {
    let g = match &cfg.graph {
        Some(_) => load_or_sample_graph(cfg)?.0,
        None => Graph::complete(cfg.n),
    };
    check_oracle_size(g.n())?;
    let t = cfg.horizon.unwrap_or(1.0);
    let a = initial_set(cfg, g.n())?;
    let exact: f64 = exact_survival_tiny(&g, cfg.lambda, &a, t)?;
    let alive = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(cfg.master_seed, i);
            Ok(run_dual(&g, cfg.lambda, &a, t, &mut rng)?.survived)
        })
        .collect::<Result<Vec<bool>, CliError>>()?;
    let est = SurvivalEstimate::from_counts(
        alive.iter().filter(|&&s| s).count() as u64,
        cfg.reps as u64,
        Z_95,
    )?;
    let sigma = est.wilson_sigma();
    let z_score = if sigma > 0.0 {
        (est.p_hat - exact) / sigma
    } else {
        0.0
    };
    let mut max_gap = 0.0f64;
    for v in 0..g.n() {
        max_gap = max_gap.max(duality_gap(&g, cfg.lambda, &a, &[v], t)?.abs_gap);
    }
    let params = json!({
        "n": g.n(), "edges": g.edge_count(), "lambda": cfg.lambda, "t": t, "initial": a,
        "reps": cfg.reps,
    });
    let result = json!({
        "exact": exact,
        "monte_carlo": est,
        "z_score": z_score,
        "max_duality_gap": max_gap,
    });
    Ok(vec![record(cfg, &params, cfg.master_seed, &result)?])
}
