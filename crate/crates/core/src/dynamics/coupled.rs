//! Two copies of the process driven by one graphical representation.
//!
//! Every vertex carries a rate-1 recovery clock and every directed edge a
//! rate-`lambda` infection arrow. Each event is applied to both copies: a
//! recovery mark heals the vertex in both, an arrow `u -> w` infects `w` in
//! every copy where `u` is infected. Started from `A ⊆ B` the copies stay
//! ordered forever.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{check_rate, DynamicsError};
use crate::graph::{Graph, GraphError};

#[derive(Debug, Clone)]
pub struct CoupledPair {
    lower: Vec<bool>,
    upper: Vec<bool>,
    clock: f64,
}

/// Summary of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledRun {
    pub steps: usize,
    /// Events after which `lower ⊆ upper` failed.
    pub violations: usize,
    pub clock: f64,
    pub lower_infected: usize,
    pub upper_infected: usize,
}

impl CoupledPair {
    pub fn new(g: &Graph, lower: &[usize], upper: &[usize]) -> Result<Self, DynamicsError> {
        let flags = |set: &[usize]| -> Result<Vec<bool>, DynamicsError> {
            let mut f = vec![false; g.n()];
            for &v in set {
                if v >= g.n() {
                    return Err(GraphError::VertexOutOfRange { vertex: v, n: g.n() }.into());
                }
                f[v] = true;
            }
            Ok(f)
        };
        Ok(Self {
            lower: flags(lower)?,
            upper: flags(upper)?,
            clock: 0.0,
        })
    }

    pub fn lower(&self) -> &[bool] {
        &self.lower
    }

    pub fn upper(&self) -> &[bool] {
        &self.upper
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_ordered(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(&a, &b)| !a || b)
    }

    /// Applies one graphical event to both copies.
    pub fn step<G: Rng + ?Sized>(&mut self, g: &Graph, lambda: f64, rng: &mut G) {
        let n = g.n();
        let arrows = 2 * g.edge_count();
        let rate = n as f64 + lambda * arrows as f64;
        if rate <= 0.0 {
            return;
        }
        let e: f64 = rng.sample(Exp1);
        self.clock += e / rate;
        if arrows == 0 || rng.random::<f64>() * rate < n as f64 {
            let v = rng.random_range(0..n);
            self.lower[v] = false;
            self.upper[v] = false;
        } else {
            let idx = rng.random_range(0..arrows);
            let offsets = g.offsets();
            let u = offsets.partition_point(|&o| o <= idx) - 1;
            let w = g.neighbors(u)[idx - offsets[u]];
            if self.lower[u] {
                self.lower[w] = true;
            }
            if self.upper[u] {
                self.upper[w] = true;
            }
        }
    }

    /// Runs `steps` events, checking inclusion after each.
    pub fn run<G: Rng + ?Sized>(
        &mut self,
        g: &Graph,
        lambda: f64,
        steps: usize,
        rng: &mut G,
    ) -> Result<CoupledRun, DynamicsError> {
        check_rate(lambda)?;
        let mut violations = usize::from(!self.is_ordered());
        for _ in 0..steps {
            self.step(g, lambda, rng);
            if !self.is_ordered() {
                violations += 1;
            }
        }
        Ok(CoupledRun {
            steps,
            violations,
            clock: self.clock,
            lower_infected: self.lower.iter().filter(|&&b| b).count(),
            upper_infected: self.upper.iter().filter(|&&b| b).count(),
        })
    }
}
