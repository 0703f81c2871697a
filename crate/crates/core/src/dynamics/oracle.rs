//! Exact transient analysis of the contact process on graphs with at most
//! [`ORACLE_MAX_VERTICES`] vertices.
//!
//! States are bitmasks over the vertex set. The distribution at time `t` is
//! computed by uniformization: with `U = max_s r(s)` the largest exit rate and
//! `P = I + Q / U`,
//!
//! ```text
//! p(t) = sum_j Poisson(j; U t) p(0) P^j
//! ```
//!
//! truncated once the retained Poisson mass is within `1e-12` of one. Long
//! horizons are split into slices with `U h <= 32` so the leading Poisson
//! weight never underflows.

use serde::Serialize;

use super::{check_rate, DynamicsError};
use crate::graph::{Graph, GraphError};
use crate::scalar::{CompensatedSum, Real};

pub const ORACLE_MAX_VERTICES: usize = 12;

const SLICE_RATE_TIME: f64 = 32.0;

struct Generator<R> {
    n: usize,
    lambda: R,
    masks: Vec<u32>,
    uniform_rate: R,
}

impl<R: Real> Generator<R> {
    fn new(g: &Graph, lambda: R) -> Self {
        let n = g.n();
        let masks: Vec<u32> = (0..n)
            .map(|v| g.neighbors(v).iter().fold(0u32, |m, &w| m | (1 << w)))
            .collect();
        let mut gen = Self {
            n,
            lambda,
            masks,
            uniform_rate: R::zero(),
        };
        gen.uniform_rate = (0..1u32 << n)
            .map(|s| gen.exit_rate(s))
            .fold(R::zero(), R::max);
        gen
    }

    fn pressure(&self, s: u32) -> u32 {
        (0..self.n)
            .filter(|&v| s & (1 << v) == 0)
            .map(|v| (s & self.masks[v]).count_ones())
            .sum()
    }

    fn exit_rate(&self, s: u32) -> R {
        R::of_usize(s.count_ones() as usize) + self.lambda * R::of_usize(self.pressure(s) as usize)
    }

    /// `out = v P`.
    fn apply(&self, v: &[R], out: &mut [R]) {
        let u = self.uniform_rate;
        for (s, o) in out.iter_mut().enumerate() {
            *o = v[s] * (R::one() - self.exit_rate(s as u32) / u);
        }
        for (s, &mass) in v.iter().enumerate() {
            if mass == R::zero() {
                continue;
            }
            let s = s as u32;
            for x in 0..self.n {
                let bit = 1u32 << x;
                if s & bit != 0 {
                    out[(s ^ bit) as usize] = out[(s ^ bit) as usize] + mass / u;
                } else {
                    let k = (s & self.masks[x]).count_ones();
                    if k > 0 {
                        let rate = self.lambda * R::of_usize(k as usize);
                        out[(s | bit) as usize] = out[(s | bit) as usize] + mass * rate / u;
                    }
                }
            }
        }
    }

    fn advance(&self, p: &[R], h: R) -> Vec<R> {
        let ut = self.uniform_rate * h;
        if ut == R::zero() {
            return p.to_vec();
        }
        let tol = R::of(1e-12).max(R::epsilon());
        let mut weight = (-ut).exp();
        let mut mass = CompensatedSum::new();
        mass.add(weight);
        let mut acc: Vec<R> = p.iter().map(|&x| x * weight).collect();
        let mut cur = p.to_vec();
        let mut next = vec![R::zero(); p.len()];
        let mut j = 0usize;
        // The Poisson tail past its mode decays geometrically; stop once the
        // retained mass is within tolerance of one.
        while R::one() - mass.value() > tol {
            j += 1;
            self.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            weight = weight * ut / R::of_usize(j);
            mass.add(weight);
            for (a, &c) in acc.iter_mut().zip(&cur) {
                *a = *a + weight * c;
            }
            if j > 100_000 {
                break;
            }
        }
        acc
    }

    fn distribution(&self, start: u32, t: R) -> Vec<R> {
        let mut p = vec![R::zero(); 1 << self.n];
        p[start as usize] = R::one();
        if t <= R::zero() {
            return p;
        }
        let ut = (self.uniform_rate * t).to_f64_lossy();
        let slices = (ut / SLICE_RATE_TIME).ceil().max(1.0) as usize;
        let h = t / R::of_usize(slices);
        for _ in 0..slices {
            p = self.advance(&p, h);
        }
        p
    }
}

fn to_mask(g: &Graph, set: &[usize]) -> Result<u32, DynamicsError> {
    set.iter().try_fold(0u32, |m, &v| {
        if v >= g.n() {
            Err(GraphError::VertexOutOfRange { vertex: v, n: g.n() }.into())
        } else {
            Ok(m | (1 << v))
        }
    })
}

fn check_size(g: &Graph) -> Result<(), DynamicsError> {
    if g.n() > ORACLE_MAX_VERTICES {
        Err(DynamicsError::TooLarge {
            n: g.n(),
            max: ORACLE_MAX_VERTICES,
        })
    } else {
        Ok(())
    }
}

fn check_inputs<R: Real>(g: &Graph, lambda: R, t: R) -> Result<(), DynamicsError> {
    check_size(g)?;
    check_rate(lambda.to_f64_lossy())?;
    if !(t >= R::zero()) || !t.is_finite() {
        return Err(DynamicsError::InvalidParameter(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

/// Exact distribution over infected sets at time `t` started from `a`,
/// indexed by bitmask.
pub fn transient_distribution<R: Real>(
    g: &Graph,
    lambda: R,
    a: &[usize],
    t: R,
) -> Result<Vec<R>, DynamicsError> {
    check_inputs(g, lambda, t)?;
    let start = to_mask(g, a)?;
    Ok(Generator::new(g, lambda).distribution(start, t))
}

/// `P(xi_t^A intersects B)`.
pub fn hitting_probability<R: Real>(
    g: &Graph,
    lambda: R,
    a: &[usize],
    b: &[usize],
    t: R,
) -> Result<R, DynamicsError> {
    let target = to_mask(g, b)?;
    let p = transient_distribution(g, lambda, a, t)?;
    Ok(p.iter()
        .enumerate()
        .filter(|(s, _)| *s as u32 & target != 0)
        .map(|(_, &x)| x)
        .collect::<CompensatedSum<R>>()
        .value()
        .min(R::one()))
}

/// Exact `P(xi_t^A is non-empty)` for `n <= 12`.
pub fn exact_survival_tiny<R: Real>(
    g: &Graph,
    lambda: R,
    a: &[usize],
    t: R,
) -> Result<R, DynamicsError> {
    let all: Vec<usize> = (0..g.n()).collect();
    hitting_probability(g, lambda, a, &all, t)
}

/// Both sides of the self-duality identity and their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityGap<R: Real = f64> {
    pub p_ab: R,
    pub p_ba: R,
    pub abs_gap: R,
}

/// `P(xi_t^A meets B)` against `P(xi_t^B meets A)`.
pub fn duality_gap<R: Real>(
    g: &Graph,
    lambda: R,
    a: &[usize],
    b: &[usize],
    t: R,
) -> Result<DualityGap<R>, DynamicsError> {
    let p_ab = hitting_probability(g, lambda, a, b, t)?;
    let p_ba = hitting_probability(g, lambda, b, a, t)?;
    Ok(DualityGap {
        p_ab,
        p_ba,
        abs_gap: (p_ab - p_ba).abs(),
    })
}
