//! Exact chain for the contact process on a star: the state is the number of
//! infected leaves and whether the center is infected.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Exp1, Geometric};
use serde::Serialize;

use super::{check_horizon, check_rate, DynamicsError};

/// `(m, center)` state of a star with `k` leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarChain {
    pub k: u32,
    /// Infected leaves, `0..=k`.
    pub m: u32,
    pub center: bool,
    pub clock: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StarEventKind {
    LeafRecovery,
    LeafInfection,
    CenterRecovery,
    CenterInfection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarEvent {
    pub dt: f64,
    pub kind: StarEventKind,
}

impl StarChain {
    pub fn new(k: u32, m: u32, center: bool) -> Result<Self, DynamicsError> {
        if k == 0 {
            return Err(DynamicsError::InvalidParameter("star needs k >= 1 leaves".into()));
        }
        if m > k {
            return Err(DynamicsError::InvalidParameter(format!(
                "{m} infected leaves exceeds k = {k}"
            )));
        }
        Ok(Self {
            k,
            m,
            center,
            clock: 0.0,
        })
    }

    /// Everything healthy; no further transitions.
    pub fn is_absorbed(&self) -> bool {
        self.m == 0 && !self.center
    }

    fn rates(&self, lambda: f64) -> [f64; 4] {
        let m = self.m as f64;
        let free = (self.k - self.m) as f64;
        if self.center {
            [m, lambda * free, 1.0, 0.0]
        } else {
            [m, 0.0, 0.0, lambda * m]
        }
    }

    pub fn total_rate(&self, lambda: f64) -> f64 {
        self.rates(lambda).iter().sum()
    }

    /// One transition; `None` once absorbed.
    ///
    /// Leaf recovery at rate `m`, leaf infection at `lambda (k - m)` while the
    /// center is infected, center recovery at rate 1, center infection at
    /// `lambda m` while it is healthy.
    pub fn step<G: Rng + ?Sized>(&mut self, lambda: f64, rng: &mut G) -> Option<StarEvent> {
        let rates = self.rates(lambda);
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let e: f64 = rng.sample(Exp1);
        let dt = e / total;
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // Last positive-rate transition absorbs any rounding at the top.
        let mut pick = rates.iter().rposition(|&r| r > 0.0).unwrap();
        for (i, &r) in rates.iter().enumerate() {
            acc += r;
            if r > 0.0 && u < acc {
                pick = i;
                break;
            }
        }
        let kind = match pick {
            0 => {
                self.m -= 1;
                StarEventKind::LeafRecovery
            }
            1 => {
                self.m += 1;
                StarEventKind::LeafInfection
            }
            2 => {
                self.center = false;
                StarEventKind::CenterRecovery
            }
            _ => {
                self.center = true;
                StarEventKind::CenterInfection
            }
        };
        self.clock += dt;
        Some(StarEvent { dt, kind })
    }
}

/// Options for [`run_star_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct StarRunConfig {
    pub horizon: f64,
    /// Leaf counts whose first hitting times are recorded.
    pub levels: Vec<u32>,
    /// Stop as soon as every level has been hit.
    pub stop_when_levels_hit: bool,
}

impl StarRunConfig {
    pub fn until(horizon: f64) -> Self {
        Self {
            horizon,
            levels: Vec::new(),
            stop_when_levels_hit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarRun {
    /// Not absorbed when the run stopped.
    pub survived: bool,
    pub min_infected_leaves: u32,
    /// First time the infected-leaf count equalled each level.
    pub hit_times: BTreeMap<u32, f64>,
    /// First time the center became healthy.
    pub center_recovery_time: Option<f64>,
    pub stopped_at: f64,
    pub final_state: StarChain,
}

/// Simulates the star chain from `initial` until absorption, the horizon, or
/// (optionally) the moment every requested level has been hit.
pub fn run_star_chain<G: Rng + ?Sized>(
    lambda: f64,
    initial: StarChain,
    config: &StarRunConfig,
    rng: &mut G,
) -> Result<StarRun, DynamicsError> {
    check_rate(lambda)?;
    check_horizon(config.horizon)?;
    let mut chain = StarChain::new(initial.k, initial.m, initial.center)?;
    chain.clock = 0.0;
    let mut hit_times = BTreeMap::new();
    let mut pending: Vec<u32> = config.levels.clone();
    let record = |m: u32, t: f64, pending: &mut Vec<u32>, hits: &mut BTreeMap<u32, f64>| {
        if let Some(i) = pending.iter().position(|&l| l == m) {
            hits.insert(m, t);
            pending.swap_remove(i);
            // Duplicate levels collapse to one.
            pending.retain(|&l| l != m);
        }
    };
    record(chain.m, 0.0, &mut pending, &mut hit_times);
    let mut min_m = chain.m;
    let mut center_recovery_time = None;

    while !(config.stop_when_levels_hit && pending.is_empty()) {
        let before = chain;
        let Some(ev) = chain.step(lambda, rng) else {
            break;
        };
        if chain.clock > config.horizon {
            chain = before;
            chain.clock = config.horizon;
            break;
        }
        match ev.kind {
            StarEventKind::LeafRecovery | StarEventKind::LeafInfection => {
                min_m = min_m.min(chain.m);
                record(chain.m, chain.clock, &mut pending, &mut hit_times);
            }
            StarEventKind::CenterRecovery => {
                center_recovery_time.get_or_insert(chain.clock);
            }
            StarEventKind::CenterInfection => {}
        }
    }
    Ok(StarRun {
        survived: !chain.is_absorbed(),
        min_infected_leaves: min_m,
        hit_times,
        center_recovery_time,
        stopped_at: chain.clock,
        final_state: chain,
    })
}

/// From `(m, healthy center)`, the number of leaf recoveries before the center
/// is reinfected; `None` if all `m` leaves recover first.
pub fn recoveries_before_reinfection<G: Rng + ?Sized>(
    k: u32,
    m: u32,
    lambda: f64,
    rng: &mut G,
) -> Result<Option<u32>, DynamicsError> {
    check_rate(lambda)?;
    let mut chain = StarChain::new(k, m, false)?;
    let mut count = 0;
    while let Some(ev) = chain.step(lambda, rng) {
        match ev.kind {
            StarEventKind::LeafRecovery => count += 1,
            StarEventKind::CenterInfection => return Ok(Some(count)),
            _ => unreachable!("healthy center admits only these transitions"),
        }
    }
    Ok(None)
}

/// Single-leaf star from `(0, infected center)` observed at `t`, conditioned
/// on the center staying infected on `[0, t]`. Returns `None` when the
/// condition fails, otherwise whether the leaf is infected at `t`.
pub fn conditioned_leaf_infected<G: Rng + ?Sized>(
    lambda: f64,
    t: f64,
    rng: &mut G,
) -> Result<Option<bool>, DynamicsError> {
    check_rate(lambda)?;
    let mut chain = StarChain::new(1, 0, true)?;
    loop {
        let before = chain;
        let Some(ev) = chain.step(lambda, rng) else {
            return Ok(Some(before.m == 1));
        };
        if chain.clock > t {
            return Ok(Some(before.m == 1));
        }
        if ev.kind == StarEventKind::CenterRecovery {
            return Ok(None);
        }
    }
}

/// One jump of the lower-bound walk for the infected-leaf count.
///
/// With total rate `lambda k + 1` the walk moves down 1 with probability
/// `(lambda k / 4) / (lambda k + 1)`, up 1 with probability
/// `(3 lambda k / 4) / (lambda k + 1)` while `y < l_cap` (otherwise it stays
/// put), and down by a shifted-geometric `N` with success probability
/// `lambda / (lambda + 1)` with probability `1 / (lambda k + 1)`.
pub fn lower_bound_walk_step<G: Rng + ?Sized>(
    k: u32,
    lambda: f64,
    y: i64,
    l_cap: i64,
    rng: &mut G,
) -> Result<i64, DynamicsError> {
    check_rate(lambda)?;
    let lk = lambda * k as f64;
    if !(lk > 0.0) {
        return Err(DynamicsError::InvalidParameter("walk needs lambda k > 0".into()));
    }
    let total = lk + 1.0;
    let u = rng.random::<f64>() * total;
    if u < lk / 4.0 {
        Ok(y - 1)
    } else if u < lk {
        Ok(if y < l_cap { y + 1 } else { y })
    } else {
        let geo = Geometric::new(lambda / (lambda + 1.0))
            .map_err(|e| DynamicsError::InvalidParameter(e.to_string()))?;
        Ok(y - rng.sample(geo) as i64)
    }
}
