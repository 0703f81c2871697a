//! Experiment configuration: flags, JSON config files and validation.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides the master seed.
pub const SEED_ENV: &str = "CONTACTNET_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GenGraph,
    Simulate,
    Star,
    RhoScan,
    FitBeta,
    Diameter,
    DualityCheck,
    OracleCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenGraph => "gen-graph",
            Command::Simulate => "simulate",
            Command::Star => "star",
            Command::RhoScan => "rho-scan",
            Command::FitBeta => "fit-beta",
            Command::Diameter => "diameter",
            Command::DualityCheck => "duality-check",
            Command::OracleCheck => "oracle-check",
        }
    }
}

/// Raw settings from the command line or a config file. Unset fields fall
/// back to the other source, then to defaults.
#[derive(Debug, Clone, Default, Parser, Deserialize)]
#[command(
    name = "contactnet",
    version,
    about = "Contact process experiments on power-law random graphs"
)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// JSON config file, or a manifest from an earlier run.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Power-law exponent of the degree law.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Vertex count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Infection rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated infection rates for rho-scan.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Star exponent: stars have degree at least n^epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Dual runs per rate in rho-scan.
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output_path: Option<PathBuf>,
    /// Edge-list file used instead of sampling a graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Comma-separated sizes for the diameter scan.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Relative slack in the diameter bound.
    #[arg(long)]
    pub slack: Option<f64>,
    /// Leaf count of the star.
    #[arg(long)]
    pub k: Option<u32>,
    /// Infected leaves at the start of a star run.
    #[arg(long)]
    pub m: Option<u32>,
    /// `all` or a comma-separated vertex list.
    #[arg(long)]
    pub initial: Option<String>,
    /// Observation times per trajectory.
    #[arg(long)]
    pub samples: Option<usize>,
    /// `lambda:rho` pairs for fit-beta, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<String>>,
    /// rho-scan results file for fit-beta.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl Settings {
    /// `self` wins wherever it has a value.
    fn or(self, other: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(other.$f)),* } };
        }
        pick!(
            command, config, alpha, k_min, k_max, n, lambda, lambda_grid, epsilon, horizon, reps,
            sample_size, master_seed, workers, output_path, graph, n_grid, slack, k, m, initial,
            samples, points, input
        )
    }
}

/// Fully resolved and validated configuration. This is what the manifest
/// echoes and what a replay reads back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub n: usize,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
    pub epsilon: f64,
    /// `None` selects the per-command default.
    pub horizon: Option<f64>,
    pub reps: usize,
    pub sample_size: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_path: PathBuf,
    pub graph: Option<PathBuf>,
    pub n_grid: Vec<usize>,
    pub slack: f64,
    pub k: u32,
    pub m: u32,
    pub initial: String,
    pub samples: usize,
    pub points: Option<Vec<String>>,
    pub input: Option<PathBuf>,
}

/// Validated configuration plus warnings for the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.08, 0.12, 0.18, 0.27, 0.40];

/// Parses `argv` (program name first), merging a config file if given and
/// the seed override from the environment.
pub fn parse_config<I, T>(argv: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let flags = Settings::try_parse_from(argv).map_err(CliError::Clap)?;
    let env_seed = std::env::var(SEED_ENV).ok();
    resolve(flags, env_seed.as_deref())
}

/// Merges flags over the config file they name and applies the seed
/// override.
pub fn resolve(flags: Settings, env_seed: Option<&str>) -> Result<Parsed, CliError> {
    let file = match &flags.config {
        Some(path) => read_settings(path)?,
        None => Settings::default(),
    };
    let mut merged = flags.or(file);
    if let Some(text) = env_seed {
        let seed = text.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV}: expected an unsigned 64-bit integer, got {text:?}"))
        })?;
        merged.master_seed = Some(seed);
    }
    validate(merged)
}

/// Reads a config file. A manifest is accepted too: its `config` object is
/// used.
pub fn read_settings(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config: cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config: {}: {e}", path.display())))?;
    if value.get("code_version").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))
}

fn usage(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{field}: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(usage(field, format!("must be positive and finite, got {x}")))
    }
}

fn at_least(field: &str, x: usize, min: usize) -> Result<usize, CliError> {
    if x >= min {
        Ok(x)
    } else {
        Err(usage(field, format!("must be at least {min}, got {x}")))
    }
}

fn validate(s: Settings) -> Result<Parsed, CliError> {
    let command = s.command.ok_or_else(|| usage("command", "required"))?;
    let mut warnings = Vec::new();

    let alpha = s.alpha.unwrap_or(3.5);
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(usage("alpha", format!("the degree law needs alpha > 1, got {alpha}")));
    }
    if command == Command::RhoScan && alpha <= 3.0 {
        warnings.push(format!(
            "alpha = {alpha}: the density exponent bracket is only established for alpha > 3"
        ));
    }
    let k_min = at_least("k-min", s.k_min.unwrap_or(3), 1)?;
    let k_max = s.k_max.unwrap_or(contactnet::degrees::DEFAULT_K_MAX);
    if k_max < k_min {
        return Err(usage("k-max", format!("must be at least k-min = {k_min}, got {k_max}")));
    }
    if command == Command::Diameter && k_min < 3 {
        return Err(usage("k-min", format!("the diameter scan needs k-min >= 3, got {k_min}")));
    }
    let default_n = match command {
        Command::DualityCheck => 8,
        Command::OracleCheck => 3,
        _ => 1_000,
    };
    let n = at_least("n", s.n.unwrap_or(default_n), 1)?;
    let lambda = s.lambda.unwrap_or(1.0);
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(usage("lambda", format!("must be non-negative and finite, got {lambda}")));
    }
    let lambda_grid = s.lambda_grid.unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec());
    if lambda_grid.is_empty() {
        return Err(usage("lambda-grid", "must not be empty"));
    }
    for &l in &lambda_grid {
        positive("lambda-grid", l)?;
    }
    let epsilon = s.epsilon.unwrap_or(0.5);
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(usage("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    let horizon = s.horizon.map(|h| positive("horizon", h)).transpose()?;
    let reps = at_least("reps", s.reps.unwrap_or(100), 1)?;
    let sample_size = at_least("sample-size", s.sample_size.unwrap_or(2_000), 1)?;
    let workers = match s.workers {
        Some(w) => at_least("workers", w, 1)?,
        None => std::thread::available_parallelism().map_or(1, |p| p.get()),
    };
    let n_grid = s.n_grid.unwrap_or_else(|| vec![n]);
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(usage("n-grid", "needs at least one size, all >= 1"));
    }
    let slack = s.slack.unwrap_or(0.5);
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(usage("slack", format!("must be non-negative, got {slack}")));
    }
    let k = s.k.unwrap_or(100);
    if k == 0 {
        return Err(usage("k", "a star needs at least one leaf"));
    }
    let m = s.m.unwrap_or(0);
    if m > k {
        return Err(usage("m", format!("must not exceed k = {k}, got {m}")));
    }
    let initial = s.initial.unwrap_or_else(|| "all".to_owned());
    let bound = if s.graph.is_some() { usize::MAX } else { n };
    parse_initial(&initial, bound)?;
    let samples = at_least("samples", s.samples.unwrap_or(101), 1)?;
    if let Some(points) = &s.points {
        parse_points(points)?;
    }
    if command == Command::FitBeta && s.points.is_none() && s.input.is_none() {
        return Err(usage("points", "fit-beta needs --points or --input"));
    }
    if command == Command::Star && s.graph.is_some() {
        return Err(usage("graph", "star runs on its own star graph"));
    }
    let master_seed = s.master_seed.unwrap_or_else(rand::random);

    Ok(Parsed {
        config: ExperimentConfig {
            command,
            alpha,
            k_min,
            k_max,
            n,
            lambda,
            lambda_grid,
            epsilon,
            horizon,
            reps,
            sample_size,
            master_seed,
            workers,
            output_path: s.output_path.unwrap_or_else(|| PathBuf::from("contactnet-out")),
            graph: s.graph,
            n_grid,
            slack,
            k,
            m,
            initial,
            samples,
            points: s.points,
            input: s.input,
        },
        warnings,
    })
}

/// `all` or a comma-separated vertex list; `None` means every vertex.
pub fn parse_initial(text: &str, n: usize) -> Result<Option<Vec<usize>>, CliError> {
    let text = text.trim();
    if text == "all" {
        return Ok(None);
    }
    if text.is_empty() {
        return Ok(Some(Vec::new()));
    }
    text.split(',')
        .map(|t| {
            let v: usize = t
                .trim()
                .parse()
                .map_err(|_| usage("initial", format!("not a vertex id: {t:?}")))?;
            if v >= n {
                return Err(usage("initial", format!("vertex {v} out of range for n = {n}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// `lambda:rho` pairs.
pub fn parse_points(points: &[String]) -> Result<Vec<(f64, f64)>, CliError> {
    points
        .iter()
        .map(|p| {
            let (l, r) = p
                .split_once(':')
                .ok_or_else(|| usage("points", format!("expected lambda:rho, got {p:?}")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| usage("points", format!("not a number: {t:?}")))
            };
            Ok((parse(l)?, parse(r)?))
        })
        .collect()
}
