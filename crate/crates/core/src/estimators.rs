//! Monte Carlo estimators built on the engine.
//!
//! Every estimator that runs replicates takes a master seed; replicate `i`
//! draws from [`replicate_rng`]`(seed, i)` and results are reduced by index,
//! so output does not depend on how many threads the rayon pool has.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::degrees::{size_biased_mean, DegreePmf, DegreeSampler, DegreesError};
use crate::dynamics::{
    run_dual, run_until_extinction, ContactState, DynamicsError, EventKind, StarThresholds,
};
use crate::graph::{diameter, is_connected, random_graph, stars_above, Graph, GraphError, DEFAULT_MAX_RETRIES};
use crate::scalar::{kahan_sum, Real};
use crate::seed::{replicate_rng, SimRng};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Degrees(#[from] DegreesError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval<R: Real>(
    successes: u64,
    trials: u64,
    z: R,
) -> Result<(R, R), EstimatorError> {
    if trials == 0 || successes > trials {
        return Err(EstimatorError::InvalidParameter(format!(
            "need 0 <= successes <= trials and trials >= 1, got {successes}/{trials}"
        )));
    }
    if !(z >= R::zero()) || !z.is_finite() {
        return Err(EstimatorError::InvalidParameter(format!("z must be finite and >= 0, got {z}")));
    }
    let n = R::of(trials as f64);
    let p = R::of(successes as f64) / n;
    let two = R::of(2.0);
    let four = R::of(4.0);
    let z2 = z * z;
    let denom = R::one() + z2 / n;
    let center = (p + z2 / (two * n)) / denom;
    let half = z / denom * (p * (R::one() - p) / n + z2 / (four * n * n)).sqrt();
    let mut low = (center - half).max(R::zero());
    let mut high = (center + half).min(R::one());
    if successes == 0 {
        low = R::zero();
    }
    if successes == trials {
        high = R::one().min(high.max(p));
    }
    // Keep p_hat inside the interval despite rounding.
    Ok((low.min(p), high.max(p)))
}

/// Proportion estimate with a Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
}

impl SurvivalEstimate {
    pub fn from_counts(successes: u64, trials: u64, z: f64) -> Result<Self, EstimatorError> {
        let (ci_low, ci_high) = wilson_interval(successes, trials, z)?;
        Ok(Self {
            successes,
            trials,
            p_hat: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            z,
        })
    }

    /// Binomial standard error at `p_hat`.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }

    /// Half-width of the Wilson interval scaled to `sigmas` standard errors.
    pub fn wilson_sigma(&self) -> f64 {
        if self.z > 0.0 {
            (self.ci_high - self.ci_low) / (2.0 * self.z)
        } else {
            self.std_error()
        }
    }
}

/// Horizon `max(10 / lambda, lambda^-(alpha - 1))` for the dual runs behind
/// the density estimate.
pub fn default_rho_horizon(lambda: f64, alpha: f64) -> f64 {
    (10.0 / lambda).max(lambda.powf(-(alpha - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RhoReplicate {
    pub index: u64,
    pub vertex: usize,
    pub survived: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEstimate {
    pub lambda: f64,
    pub horizon: f64,
    pub estimate: SurvivalEstimate,
    pub replicates: Vec<RhoReplicate>,
}

/// Density estimate: start the dual from a uniformly drawn vertex (with
/// replacement) and record whether it is alive at `horizon`.
pub fn estimate_rho(
    g: &Graph,
    lambda: f64,
    horizon: f64,
    sample_size: usize,
    seed: u64,
) -> Result<RhoEstimate, EstimatorError> {
    use rand::Rng;
    if sample_size == 0 {
        return Err(EstimatorError::InvalidParameter("sample_size must be >= 1".into()));
    }
    if g.n() == 0 {
        return Err(EstimatorError::InvalidParameter("graph has no vertices".into()));
    }
    let replicates = (0..sample_size as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let vertex = rng.random_range(0..g.n());
            let out = run_dual(g, lambda, &[vertex], horizon, &mut rng)?;
            Ok(RhoReplicate {
                index: i,
                vertex,
                survived: out.survived,
            })
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    let successes = replicates.iter().filter(|r| r.survived).count() as u64;
    Ok(RhoEstimate {
        lambda,
        horizon,
        estimate: SurvivalEstimate::from_counts(successes, sample_size as u64, Z_95)?,
        replicates,
    })
}

/// Log-log regression of density on infection rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit<R: Real = f64> {
    pub beta_hat: R,
    pub intercept: R,
    pub r_squared: R,
    pub stderr_beta: R,
    pub points: Vec<(R, R)>,
}

impl<R: Real> ExponentFit<R> {
    /// `exp(intercept) * lambda^beta_hat`.
    pub fn predict(&self, lambda: R) -> R {
        (self.intercept + self.beta_hat * lambda.ln()).exp()
    }
}

fn check_points<R: Real>(points: &[(R, R)]) -> Result<(), EstimatorError> {
    if points.len() < 3 {
        return Err(EstimatorError::DegenerateInput(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(l, r)| !(l > R::zero()) || !(r > R::zero()) || !l.is_finite() || !r.is_finite())
    {
        return Err(EstimatorError::DegenerateInput(
            "lambda and rho must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Ordinary least squares of `ln rho` on `ln lambda`.
pub fn fit_exponent<R: Real>(points: &[(R, R)]) -> Result<ExponentFit<R>, EstimatorError> {
    let weights = vec![R::one(); points.len()];
    fit_exponent_weighted(points, &weights)
}

/// Weighted least squares of `ln rho` on `ln lambda`.
pub fn fit_exponent_weighted<R: Real>(
    points: &[(R, R)],
    weights: &[R],
) -> Result<ExponentFit<R>, EstimatorError> {
    check_points(points)?;
    if weights.len() != points.len() || weights.iter().any(|w| !(*w > R::zero())) {
        return Err(EstimatorError::DegenerateInput(
            "one positive weight per point required".into(),
        ));
    }
    let xs: Vec<R> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<R> = points.iter().map(|p| p.1.ln()).collect();
    let sw = kahan_sum(weights.iter().copied());
    let mean = |v: &[R]| kahan_sum(v.iter().zip(weights).map(|(&a, &w)| a * w)) / sw;
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx = kahan_sum(xs.iter().zip(weights).map(|(&x, &w)| w * (x - mx) * (x - mx)));
    let sxy = kahan_sum(
        xs.iter()
            .zip(&ys)
            .zip(weights)
            .map(|((&x, &y), &w)| w * (x - mx) * (y - my)),
    );
    let syy = kahan_sum(ys.iter().zip(weights).map(|(&y, &w)| w * (y - my) * (y - my)));
    let spread = kahan_sum(xs.iter().map(|&x| (x - mx).abs()));
    if sxx <= R::zero() || spread <= R::epsilon() * R::of_usize(xs.len()) * mx.abs().max(R::one()) {
        return Err(EstimatorError::DegenerateInput("ln lambda has zero variance".into()));
    }
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let sse = kahan_sum(
        xs.iter()
            .zip(&ys)
            .zip(weights)
            .map(|((&x, &y), &w)| {
                let r = y - intercept - beta * x;
                w * r * r
            }),
    );
    let r_squared = if syy > R::zero() {
        (R::one() - sse / syy).max(R::zero())
    } else {
        R::one()
    };
    let dof = R::of_usize(points.len() - 2);
    let stderr_beta = (sse / dof / sxx).sqrt();
    Ok(ExponentFit {
        beta_hat: beta,
        intercept,
        r_squared,
        stderr_beta,
        points: points.to_vec(),
    })
}

/// Extinction-time statistics with right-censoring at `cap`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceStats {
    pub cap: f64,
    pub reps: usize,
    /// Runs still alive at `cap`.
    pub censored: usize,
    /// Per replicate; `None` when censored.
    pub times: Vec<Option<f64>>,
    /// Quantiles with censored runs ranked above every finite time; `None`
    /// when the order statistic falls among censored runs.
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    /// Mean of uncensored times.
    pub mean_uncensored: Option<f64>,
}

impl PersistenceStats {
    fn from_times(cap: f64, times: Vec<Option<f64>>) -> Self {
        let mut finite: Vec<f64> = times.iter().flatten().copied().collect();
        finite.sort_by(f64::total_cmp);
        let reps = times.len();
        let censored = reps - finite.len();
        // Type-7 quantile over the full sample with censored runs at +inf.
        let quantile = |q: f64| -> Option<f64> {
            if reps == 0 {
                return None;
            }
            let h = (reps - 1) as f64 * q;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            let a = *finite.get(lo)?;
            let b = *finite.get(hi)?;
            Some(a + (h - lo as f64) * (b - a))
        };
        let mean_uncensored =
            (!finite.is_empty()).then(|| kahan_sum(finite.iter().copied()) / finite.len() as f64);
        Self {
            cap,
            reps,
            censored,
            q1: quantile(0.25),
            median: quantile(0.5),
            q3: quantile(0.75),
            mean_uncensored,
            times,
        }
    }

    /// Median with censored runs counted at the cap.
    pub fn median_at_cap(&self) -> f64 {
        self.median.unwrap_or(self.cap)
    }
}

/// Extinction times from the all-infected state, censored at `cap`.
pub fn persistence_time(
    g: &Graph,
    lambda: f64,
    cap: f64,
    reps: usize,
    seed: u64,
) -> Result<PersistenceStats, EstimatorError> {
    if reps == 0 {
        return Err(EstimatorError::InvalidParameter("reps must be >= 1".into()));
    }
    let all: Vec<usize> = (0..g.n()).collect();
    let times = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            Ok(run_until_extinction(g, lambda, &all, cap, &mut rng)?)
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    Ok(PersistenceStats::from_times(cap, times))
}

/// One sampled graph in a diameter scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiameterSample {
    pub index: u64,
    pub connected: bool,
    /// Exact diameter, connected samples only.
    pub diameter: Option<usize>,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterRow {
    pub n: usize,
    pub samples: usize,
    pub connected_fraction: f64,
    pub mean_diameter: Option<f64>,
    pub max_diameter: Option<usize>,
    /// `(1 + slack) ln n / ln nu`.
    pub bound: f64,
    /// Fraction of connected samples with diameter at most `bound`.
    pub fraction_within: Option<f64>,
    /// False for degenerate sizes where no scaling claim is made.
    pub bound_applicable: bool,
    pub graphs: Vec<DiameterSample>,
}

impl DiameterRow {
    /// Recomputes `fraction_within` for another slack on the same graphs.
    pub fn fraction_within_for(&self, nu: f64, slack: f64) -> Option<f64> {
        let bound = (1.0 + slack) * (self.n as f64).ln() / nu.ln();
        fraction_within(&self.graphs, bound)
    }
}

fn fraction_within(graphs: &[DiameterSample], bound: f64) -> Option<f64> {
    let diams: Vec<usize> = graphs.iter().filter_map(|s| s.diameter).collect();
    (!diams.is_empty())
        .then(|| diams.iter().filter(|&&d| d as f64 <= bound).count() as f64 / diams.len() as f64)
}

/// Diameters of configuration-model graphs against `(1 + slack) ln n / ln nu`.
///
/// Disconnected samples are counted but excluded from diameter statistics.
/// Sizes where `n <= k_min + 1` are reported with `bound_applicable = false`.
pub fn diameter_scaling_check<R: Real>(
    pmf: &DegreePmf<R>,
    n_grid: &[usize],
    samples: usize,
    epsilon_slack: f64,
    seed: u64,
) -> Result<Vec<DiameterRow>, EstimatorError> {
    if pmf.k_min() < 3 {
        return Err(EstimatorError::InvalidParameter(format!(
            "diameter scaling needs k_min >= 3, got {}",
            pmf.k_min()
        )));
    }
    if samples == 0 {
        return Err(EstimatorError::InvalidParameter("samples must be >= 1".into()));
    }
    let nu = size_biased_mean(pmf).to_f64_lossy();
    let sampler = DegreeSampler::new(pmf);
    let mut rows = Vec::with_capacity(n_grid.len());
    for (row, &n) in n_grid.iter().enumerate() {
        let graphs = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let index = row as u64 * samples as u64 + i;
                let mut rng = replicate_rng(seed, index);
                sample_diameter(&sampler, n, index, &mut rng)
            })
            .collect::<Result<Vec<_>, EstimatorError>>()?;
        let diams: Vec<usize> = graphs.iter().filter_map(|s| s.diameter).collect();
        let bound = (1.0 + epsilon_slack) * (n as f64).ln() / nu.ln();
        rows.push(DiameterRow {
            n,
            samples,
            connected_fraction: diams.len() as f64 / samples as f64,
            mean_diameter: (!diams.is_empty())
                .then(|| diams.iter().sum::<usize>() as f64 / diams.len() as f64),
            max_diameter: diams.iter().copied().max(),
            bound,
            fraction_within: fraction_within(&graphs, bound),
            bound_applicable: n > pmf.k_min() + 1,
            graphs,
        });
    }
    Ok(rows)
}

fn sample_diameter<R: Real>(
    sampler: &DegreeSampler<R>,
    n: usize,
    index: u64,
    rng: &mut SimRng,
) -> Result<DiameterSample, EstimatorError> {
    let sample = random_graph(sampler, n, rng, DEFAULT_MAX_RETRIES)?;
    let connected = is_connected(&sample.graph);
    Ok(DiameterSample {
        index,
        connected,
        diameter: if connected {
            Some(diameter(&sample.graph)?)
        } else {
            None
        },
        retries: sample.retries,
    })
}

/// Stars of a fixed graph with their hot/lit thresholds at one rate.
#[derive(Debug, Clone)]
pub struct StarWatch {
    lambda: f64,
    is_star: Vec<bool>,
    thresholds: Vec<StarThresholds>,
    stars: Vec<usize>,
}

impl StarWatch {
    pub fn new(g: &Graph, lambda: f64, epsilon: f64) -> Self {
        let stars = stars_above(g, epsilon);
        let mut is_star = vec![false; g.n()];
        for &s in &stars {
            is_star[s] = true;
        }
        let thresholds = (0..g.n())
            .map(|v| StarThresholds::new(g.degree(v).max(1), lambda))
            .collect();
        Self {
            lambda,
            is_star,
            thresholds,
            stars,
        }
    }

    pub fn stars(&self) -> &[usize] {
        &self.stars
    }

    fn is_hot(&self, state: &ContactState, v: usize) -> bool {
        self.is_star[v] && state.inf_neighbors(v) >= self.thresholds[v].hot
    }

    /// Runs the dual from `{x}` and reports whether some star turns hot
    /// before extinction or `horizon`.
    pub fn dual_lights_star<G: rand::Rng + ?Sized>(
        &self,
        g: &Graph,
        x: usize,
        horizon: f64,
        rng: &mut G,
    ) -> Result<bool, EstimatorError> {
        if self.stars.is_empty() {
            return Ok(false);
        }
        let mut state = ContactState::with_infected(g, &[x])?;
        if g.neighbors(x).iter().any(|&w| self.is_hot(&state, w)) {
            return Ok(true);
        }
        while state.num_infected() > 0 {
            let ev = state.propose(self.lambda, rng)?;
            if ev.time > horizon {
                return Ok(false);
            }
            state.apply(g, &ev);
            // Only an infection raises infected-neighbor counts.
            if ev.kind == EventKind::Infection
                && g.neighbors(ev.vertex).iter().any(|&w| self.is_hot(&state, w))
            {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Whether the dual started at `x` makes some star of degree `>= n^epsilon`
/// hot before dying out or reaching `horizon`.
pub fn dual_lights_star<G: rand::Rng + ?Sized>(
    g: &Graph,
    lambda: f64,
    x: usize,
    horizon: f64,
    epsilon: f64,
    rng: &mut G,
) -> Result<bool, EstimatorError> {
    if !(horizon > 0.0) {
        return Err(EstimatorError::InvalidParameter("horizon must be positive".into()));
    }
    if x >= g.n() {
        return Err(GraphError::VertexOutOfRange { vertex: x, n: g.n() }.into());
    }
    StarWatch::new(g, lambda, epsilon).dual_lights_star(g, x, horizon, rng)
}

/// Fraction of dual runs that light a star, starting from vertices drawn
/// uniformly from `starts` (replicate `i` uses `starts[i % len]`).
pub fn estimate_dual_lights(
    g: &Graph,
    lambda: f64,
    starts: &[usize],
    reps: usize,
    horizon: f64,
    epsilon: f64,
    seed: u64,
) -> Result<SurvivalEstimate, EstimatorError> {
    if starts.is_empty() || reps == 0 {
        return Err(EstimatorError::InvalidParameter(
            "need at least one start vertex and one replicate".into(),
        ));
    }
    let watch = StarWatch::new(g, lambda, epsilon);
    let hits = (0..reps as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let x = starts[i as usize % starts.len()];
            watch.dual_lights_star(g, x, horizon, &mut rng)
        })
        .collect::<Result<Vec<_>, EstimatorError>>()?;
    let successes = hits.iter().filter(|&&h| h).count() as u64;
    SurvivalEstimate::from_counts(successes, reps as u64, Z_95)
}
