use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::state::{ContactState, EventKind};
use super::{check_horizon, check_rate, DynamicsError};
use crate::graph::{stars_above, Graph, GraphError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StarClass {
    Hot,
    Lit,
    Cold,
}

/// Integer hot/lit thresholds for a star of a given degree.
///
/// Hot needs `ceil(lambda k / 4)` infected neighbors, lit needs
/// `ceil(lambda k / 10)`; both are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StarThresholds {
    pub hot: u32,
    pub lit: u32,
}

impl StarThresholds {
    pub fn new(degree: usize, lambda: f64) -> Self {
        let ceil = |x: f64| -> u32 {
            // Absorb rounding so that an exact product such as 0.4 * 100 / 4
            // does not round up past the integer.
            let c = (x - 1e-9 * x.abs().max(1.0)).ceil();
            c.max(1.0) as u32
        };
        let k = degree as f64;
        Self {
            hot: ceil(lambda * k / 4.0),
            lit: ceil(lambda * k / 10.0),
        }
    }

    pub fn classify(&self, inf_count: u32) -> StarClass {
        if inf_count >= self.hot {
            StarClass::Hot
        } else if inf_count >= self.lit {
            StarClass::Lit
        } else {
            StarClass::Cold
        }
    }
}

/// Hot, lit or cold given the number of infected neighbors of a star.
pub fn classify_star(inf_count: u32, degree: usize, lambda: f64) -> StarClass {
    StarThresholds::new(degree, lambda).classify(inf_count)
}

/// One observation of a trajectory. `lit` counts every star at or above the
/// lit threshold, hot stars included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub infected: usize,
    pub lit: usize,
    pub hot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Time the infected set became empty, if it did before the horizon.
    pub extinction_time: Option<f64>,
}

impl Trajectory {
    /// CSV with header `t,infected,lit,hot`; an extinction is the final row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,infected,lit,hot\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.t, s.infected, s.lit, s.hot);
        }
        out
    }

    pub fn final_infected(&self) -> usize {
        self.samples.last().map_or(0, |s| s.infected)
    }
}

/// `count` evenly spaced times from 0 to `horizon` inclusive.
pub fn uniform_schedule(horizon: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| horizon * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

struct StarTracker {
    stars: Vec<(usize, StarThresholds)>,
}

impl StarTracker {
    fn new(g: &Graph, lambda: f64, epsilon: f64) -> Self {
        Self {
            stars: stars_above(g, epsilon)
                .into_iter()
                .map(|v| (v, StarThresholds::new(g.degree(v), lambda)))
                .collect(),
        }
    }

    fn sample(&self, state: &ContactState, t: f64) -> Sample {
        let (mut lit, mut hot) = (0, 0);
        for &(v, th) in &self.stars {
            match th.classify(state.inf_neighbors(v)) {
                super::StarClass::Hot => {
                    hot += 1;
                    lit += 1;
                }
                super::StarClass::Lit => lit += 1,
                super::StarClass::Cold => {}
            }
        }
        Sample {
            t,
            infected: state.num_infected(),
            lit,
            hot,
        }
    }
}

/// Forward simulation from `initial`, observed at `sample_times`.
///
/// Sample times must be non-negative and strictly increasing; times past the
/// horizon are ignored. On extinction the trajectory ends with a zero row at
/// the extinction time.
pub fn run_forward<G: Rng + ?Sized>(
    g: &Graph,
    lambda: f64,
    initial: &[usize],
    horizon: f64,
    sample_times: &[f64],
    epsilon: f64,
    rng: &mut G,
) -> Result<Trajectory, DynamicsError> {
    check_rate(lambda)?;
    check_horizon(horizon)?;
    if sample_times.iter().any(|t| !(*t >= 0.0))
        || sample_times.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(DynamicsError::InvalidParameter(
            "sample times must be non-negative and strictly increasing".into(),
        ));
    }
    let tracker = StarTracker::new(g, lambda, epsilon);
    let mut state = ContactState::with_infected(g, initial)?;
    let mut schedule = sample_times.iter().copied().filter(|&t| t <= horizon).peekable();
    let mut samples = Vec::with_capacity(sample_times.len() + 1);

    loop {
        if state.num_infected() == 0 {
            let t_ext = state.clock();
            samples.push(Sample {
                t: t_ext,
                infected: 0,
                lit: 0,
                hot: 0,
            });
            return Ok(Trajectory {
                samples,
                extinction_time: Some(t_ext),
            });
        }
        let ev = state.propose(lambda, rng)?;
        while let Some(&t) = schedule.peek() {
            if t < ev.time {
                samples.push(tracker.sample(&state, t));
                schedule.next();
            } else {
                break;
            }
        }
        if ev.time > horizon {
            state.set_clock(horizon);
            return Ok(Trajectory {
                samples,
                extinction_time: None,
            });
        }
        state.apply(g, &ev);
    }
}

/// Outcome of a dual run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualOutcome {
    pub survived: bool,
    pub final_set: Vec<usize>,
}

/// Runs the (self-dual) process from `a` to `horizon`.
pub fn run_dual<G: Rng + ?Sized>(
    g: &Graph,
    lambda: f64,
    a: &[usize],
    horizon: f64,
    rng: &mut G,
) -> Result<DualOutcome, DynamicsError> {
    check_rate(lambda)?;
    check_horizon(horizon)?;
    let mut state = ContactState::with_infected(g, a)?;
    while state.num_infected() > 0 {
        let ev = state.propose(lambda, rng)?;
        if ev.time > horizon {
            break;
        }
        state.apply(g, &ev);
    }
    Ok(DualOutcome {
        survived: state.num_infected() > 0,
        final_set: state.infected_set(),
    })
}

/// Extinction time from `initial`, or `None` if still alive at `cap`.
pub fn run_until_extinction<G: Rng + ?Sized>(
    g: &Graph,
    lambda: f64,
    initial: &[usize],
    cap: f64,
    rng: &mut G,
) -> Result<Option<f64>, DynamicsError> {
    check_rate(lambda)?;
    check_horizon(cap)?;
    let mut state = ContactState::with_infected(g, initial)?;
    while state.num_infected() > 0 {
        let ev = state.propose(lambda, rng)?;
        if ev.time > cap {
            return Ok(None);
        }
        state.apply(g, &ev);
    }
    Ok(Some(state.clock()))
}

/// First time `target` is infected when started from `initial`, or `None` if
/// that has not happened by `horizon`.
pub fn first_infection_time<G: Rng + ?Sized>(
    g: &Graph,
    lambda: f64,
    initial: &[usize],
    target: usize,
    horizon: f64,
    rng: &mut G,
) -> Result<Option<f64>, DynamicsError> {
    check_rate(lambda)?;
    check_horizon(horizon)?;
    if target >= g.n() {
        return Err(GraphError::VertexOutOfRange { vertex: target, n: g.n() }.into());
    }
    let mut state = ContactState::with_infected(g, initial)?;
    if state.is_infected(target) {
        return Ok(Some(0.0));
    }
    while state.num_infected() > 0 {
        let ev = state.propose(lambda, rng)?;
        if ev.time > horizon {
            break;
        }
        state.apply(g, &ev);
        if ev.kind == EventKind::Infection && ev.vertex == target {
            return Ok(Some(ev.time));
        }
    }
    Ok(None)
}
