use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::DynamicsError;
use crate::graph::{Graph, GraphError};

/// Binary indexed tree over non-negative integer weights.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<i64>,
    top: usize,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self {
            tree: vec![0; n + 1],
            top,
        }
    }

    fn add(&mut self, i: usize, delta: i64) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: i64) -> usize {
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Recovery,
    Infection,
}

/// One transition of the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub dt: f64,
    /// Clock after the event.
    pub time: f64,
    pub kind: EventKind,
    pub vertex: usize,
}

/// Mutable state of the contact process on a fixed graph.
///
/// Keeps per-vertex infected-neighbor counts and a weighted index over
/// susceptible vertices (weight = infected-neighbor count), so a transition
/// costs `O(deg log n)`.
#[derive(Debug, Clone)]
pub struct ContactState {
    infected: Vec<bool>,
    inf_neighbors: Vec<u32>,
    num_infected: usize,
    edge_pressure: u64,
    clock: f64,
    infected_list: Vec<usize>,
    slot: Vec<usize>,
    pressure: Fenwick,
}

impl ContactState {
    /// All-susceptible state at time 0.
    pub fn new(g: &Graph) -> Self {
        let n = g.n();
        Self {
            infected: vec![false; n],
            inf_neighbors: vec![0; n],
            num_infected: 0,
            edge_pressure: 0,
            clock: 0.0,
            infected_list: Vec::new(),
            slot: vec![usize::MAX; n],
            pressure: Fenwick::new(n),
        }
    }

    /// State at time 0 with `initial` infected; duplicates are ignored.
    pub fn with_infected(g: &Graph, initial: &[usize]) -> Result<Self, DynamicsError> {
        let mut s = Self::new(g);
        for &v in initial {
            if v >= g.n() {
                return Err(GraphError::VertexOutOfRange { vertex: v, n: g.n() }.into());
            }
            if !s.infected[v] {
                s.infect(g, v);
            }
        }
        Ok(s)
    }

    /// State with every vertex infected.
    pub fn all_infected(g: &Graph) -> Self {
        let all: Vec<usize> = (0..g.n()).collect();
        Self::with_infected(g, &all).expect("all vertices in range")
    }

    pub fn n(&self) -> usize {
        self.infected.len()
    }

    pub fn num_infected(&self) -> usize {
        self.num_infected
    }

    /// Directed infected-to-susceptible adjacencies.
    pub fn edge_pressure(&self) -> u64 {
        self.edge_pressure
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn set_clock(&mut self, t: f64) {
        self.clock = t;
    }

    pub fn is_infected(&self, v: usize) -> bool {
        self.infected[v]
    }

    pub fn infected_flags(&self) -> &[bool] {
        &self.infected
    }

    pub fn inf_neighbors(&self, v: usize) -> u32 {
        self.inf_neighbors[v]
    }

    /// Infected vertices, ascending.
    pub fn infected_set(&self) -> Vec<usize> {
        let mut v = self.infected_list.clone();
        v.sort_unstable();
        v
    }

    /// Total event rate `num_infected + lambda * edge_pressure`.
    pub fn total_rate(&self, lambda: f64) -> f64 {
        self.num_infected as f64 + lambda * self.edge_pressure as f64
    }

    /// Marks susceptible `v` infected and updates every aggregate.
    pub fn infect(&mut self, g: &Graph, v: usize) {
        debug_assert!(!self.infected[v]);
        let own = self.inf_neighbors[v];
        self.pressure.add(v, -(own as i64));
        self.edge_pressure -= own as u64;
        self.infected[v] = true;
        self.slot[v] = self.infected_list.len();
        self.infected_list.push(v);
        self.num_infected += 1;
        for &w in g.neighbors(v) {
            self.inf_neighbors[w] += 1;
            if !self.infected[w] {
                self.pressure.add(w, 1);
                self.edge_pressure += 1;
            }
        }
    }

    /// Marks infected `v` susceptible and updates every aggregate.
    pub fn recover(&mut self, g: &Graph, v: usize) {
        debug_assert!(self.infected[v]);
        self.infected[v] = false;
        let i = self.slot[v];
        self.infected_list.swap_remove(i);
        if let Some(&moved) = self.infected_list.get(i) {
            self.slot[moved] = i;
        }
        self.slot[v] = usize::MAX;
        self.num_infected -= 1;
        let own = self.inf_neighbors[v];
        self.pressure.add(v, own as i64);
        self.edge_pressure += own as u64;
        for &w in g.neighbors(v) {
            self.inf_neighbors[w] -= 1;
            if !self.infected[w] {
                self.pressure.add(w, -1);
                self.edge_pressure -= 1;
            }
        }
    }

    /// Draws the next transition without applying it.
    pub fn propose<G: Rng + ?Sized>(
        &self,
        lambda: f64,
        rng: &mut G,
    ) -> Result<Event, DynamicsError> {
        if self.num_infected == 0 {
            return Err(DynamicsError::EmptyState);
        }
        let rate = self.total_rate(lambda);
        let e: f64 = rng.sample(Exp1);
        let dt = e / rate;
        let recover_weight = self.num_infected as f64;
        let (kind, vertex) = if self.edge_pressure == 0 || rng.random::<f64>() * rate < recover_weight {
            let i = rng.random_range(0..self.num_infected);
            (EventKind::Recovery, self.infected_list[i])
        } else {
            let target = rng.random_range(0..self.edge_pressure) as i64;
            (EventKind::Infection, self.pressure.find(target))
        };
        Ok(Event {
            dt,
            time: self.clock + dt,
            kind,
            vertex,
        })
    }

    /// Applies a proposed transition and advances the clock.
    pub fn apply(&mut self, g: &Graph, event: &Event) {
        match event.kind {
            EventKind::Recovery => self.recover(g, event.vertex),
            EventKind::Infection => self.infect(g, event.vertex),
        }
        self.clock = event.time;
    }

    /// Recomputes every aggregate from the infected flags and compares with
    /// the incremental values. Returns a description of the first mismatch.
    pub fn audit(&self, g: &Graph) -> Result<(), String> {
        let count = self.infected.iter().filter(|&&b| b).count();
        if count != self.num_infected || count != self.infected_list.len() {
            return Err(format!(
                "num_infected {} vs recount {count} (list {})",
                self.num_infected,
                self.infected_list.len()
            ));
        }
        let mut pressure = 0u64;
        for v in 0..g.n() {
            let k = g.neighbors(v).iter().filter(|&&w| self.infected[w]).count() as u32;
            if k != self.inf_neighbors[v] {
                return Err(format!(
                    "inf_neighbors({v}) = {} vs recount {k}",
                    self.inf_neighbors[v]
                ));
            }
            if !self.infected[v] {
                pressure += k as u64;
            }
            if self.infected[v] && self.infected_list[self.slot[v]] != v {
                return Err(format!("slot index broken at {v}"));
            }
        }
        if pressure != self.edge_pressure {
            return Err(format!(
                "edge_pressure {} vs recount {pressure}",
                self.edge_pressure
            ));
        }
        Ok(())
    }
}

/// One direct-method transition: exponential waiting time at the total rate,
/// then a recovery (uniform infected vertex) or an infection (susceptible
/// vertex chosen proportionally to its infected-neighbor count).
pub fn gillespie_step<G: Rng + ?Sized>(
    state: &mut ContactState,
    g: &Graph,
    lambda: f64,
    rng: &mut G,
) -> Result<Event, DynamicsError> {
    let ev = state.propose(lambda, rng)?;
    state.apply(g, &ev);
    Ok(ev)
}
