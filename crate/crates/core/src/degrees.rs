//! Degree distributions: truncated power laws, the size-biased transform and
//! i.i.d. degree sequences conditioned on an even sum.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{kahan_sum, Real};

/// Default truncation of power-law supports.
pub const DEFAULT_K_MAX: usize = 1_000_000;

/// Default cap on whole-sequence resampling rounds.
pub const DEFAULT_RESAMPLE_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DegreesError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degree sum still odd after {rounds} resampling rounds")]
    ResampleLimitExceeded { rounds: usize },
}

/// Tolerance used for normalization checks at precision `R`.
pub fn normalization_tolerance<R: Real>() -> R {
    R::of(1e-12).max(R::epsilon() * R::of(64.0))
}

/// Probability mass function over degrees `k_min..=k_max`.
///
/// `alpha` records the power-law exponent used to build the table, or zero
/// for pmfs built from explicit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf<R>", into = "RawPmf<R>")]
#[serde(bound(serialize = "R: Real + Serialize", deserialize = "R: Real + Deserialize<'de>"))]
pub struct DegreePmf<R: Real = f64> {
    k_min: usize,
    k_max: usize,
    alpha: R,
    probs: Vec<R>,
}

#[derive(Serialize, Deserialize)]
struct RawPmf<R> {
    k_min: usize,
    k_max: usize,
    alpha: R,
    probs: Vec<R>,
}

impl<R: Real> TryFrom<RawPmf<R>> for DegreePmf<R> {
    type Error = DegreesError;

    fn try_from(raw: RawPmf<R>) -> Result<Self, Self::Error> {
        if raw.k_max < raw.k_min || raw.probs.len() != raw.k_max - raw.k_min + 1 {
            return Err(DegreesError::InvalidParameter(format!(
                "support {}..={} does not match {} probabilities",
                raw.k_min,
                raw.k_max,
                raw.probs.len()
            )));
        }
        let pmf = DegreePmf {
            k_min: raw.k_min,
            k_max: raw.k_max,
            alpha: raw.alpha,
            probs: raw.probs,
        };
        pmf.validate()?;
        Ok(pmf)
    }
}

impl<R: Real> From<DegreePmf<R>> for RawPmf<R> {
    fn from(p: DegreePmf<R>) -> Self {
        RawPmf {
            k_min: p.k_min,
            k_max: p.k_max,
            alpha: p.alpha,
            probs: p.probs,
        }
    }
}

impl<R: Real> DegreePmf<R> {
    /// Builds a pmf on `k_min..` from non-negative weights, normalizing them.
    pub fn from_weights(k_min: usize, weights: &[R]) -> Result<Self, DegreesError> {
        if k_min < 1 {
            return Err(DegreesError::InvalidParameter("k_min must be >= 1".into()));
        }
        if weights.is_empty() {
            return Err(DegreesError::InvalidParameter("empty support".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < R::zero()) {
            return Err(DegreesError::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total = kahan_sum(weights.iter().copied());
        if total <= R::zero() {
            return Err(DegreesError::InvalidParameter("weights sum to zero".into()));
        }
        Ok(Self {
            k_min,
            k_max: k_min + weights.len() - 1,
            alpha: R::zero(),
            probs: weights.iter().map(|&w| w / total).collect(),
        })
    }

    /// Point mass at `k`.
    pub fn deterministic(k: usize) -> Result<Self, DegreesError> {
        Self::from_weights(k, &[R::one()])
    }

    fn validate(&self) -> Result<(), DegreesError> {
        if self.k_min < 1 {
            return Err(DegreesError::InvalidParameter("k_min must be >= 1".into()));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < R::zero()) {
            return Err(DegreesError::InvalidParameter(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total = kahan_sum(self.probs.iter().copied());
        if (total - R::one()).abs() > normalization_tolerance::<R>() {
            return Err(DegreesError::InvalidParameter(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn alpha(&self) -> R {
        self.alpha
    }

    pub fn probs(&self) -> &[R] {
        &self.probs
    }

    /// `P(D = k)`, zero off the support.
    pub fn prob(&self, k: usize) -> R {
        if k < self.k_min || k > self.k_max {
            R::zero()
        } else {
            self.probs[k - self.k_min]
        }
    }

    /// `(k, p_k)` pairs over the support.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (usize, R)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.k_min + i, p))
    }
}

/// Size-biased law shifted down by one: entry `k - 1` carries `k p_k / mu`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBiasedPmf<R: Real = f64> {
    k_min: usize,
    k_max: usize,
    probs: Vec<R>,
}

impl<R: Real> SizeBiasedPmf<R> {
    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn probs(&self) -> &[R] {
        &self.probs
    }

    pub fn prob(&self, j: usize) -> R {
        if j < self.k_min || j > self.k_max {
            R::zero()
        } else {
            self.probs[j - self.k_min]
        }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (usize, R)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.k_min + i, p))
    }

    pub fn mean(&self) -> R {
        kahan_sum(self.iter().map(|(j, q)| R::of_usize(j) * q))
    }
}

/// Truncated power law `p_k = k^-alpha / Z` on `k_min..=k_max`.
pub fn power_law_pmf<R: Real>(
    alpha: R,
    k_min: usize,
    k_max: usize,
) -> Result<DegreePmf<R>, DegreesError> {
    if !(alpha > R::one()) || !alpha.is_finite() {
        return Err(DegreesError::InvalidParameter(format!(
            "alpha must exceed 1, got {alpha}"
        )));
    }
    if k_min < 1 {
        return Err(DegreesError::InvalidParameter("k_min must be >= 1".into()));
    }
    if k_max < k_min {
        return Err(DegreesError::InvalidParameter(format!(
            "k_max {k_max} below k_min {k_min}"
        )));
    }
    let weights: Vec<R> = (k_min..=k_max)
        .map(|k| R::of_usize(k).powf(-alpha))
        .collect();
    // Summing smallest-first keeps the compensated sum tight.
    let z = kahan_sum(weights.iter().rev().copied());
    Ok(DegreePmf {
        k_min,
        k_max,
        alpha,
        probs: weights.into_iter().map(|w| w / z).collect(),
    })
}

/// `mu = sum k p_k`.
pub fn mean_degree<R: Real>(p: &DegreePmf<R>) -> R {
    kahan_sum(p.iter().rev().map(|(k, pk)| R::of_usize(k) * pk))
}

/// Size-biased transform `q_{k-1} = k p_k / mu`.
pub fn size_biased<R: Real>(p: &DegreePmf<R>) -> SizeBiasedPmf<R> {
    let mu = mean_degree(p);
    SizeBiasedPmf {
        k_min: p.k_min - 1,
        k_max: p.k_max - 1,
        probs: p.iter().map(|(k, pk)| R::of_usize(k) * pk / mu).collect(),
    }
}

/// `nu`, the mean of the size-biased law: `sum k (k - 1) p_k / mu`.
pub fn size_biased_mean<R: Real>(p: &DegreePmf<R>) -> R {
    let mu = mean_degree(p);
    let second = kahan_sum(
        p.iter()
            .rev()
            .map(|(k, pk)| R::of_usize(k) * R::of_usize(k - 1) * pk),
    );
    second / mu
}

const GUIDE_BITS: u32 = 16;
const GUIDE_SLOTS: usize = 1 << GUIDE_BITS;

/// Inverse-CDF sampler over a [`DegreePmf`].
#[derive(Debug, Clone)]
pub struct DegreeSampler<R: Real = f64> {
    k_min: usize,
    cdf: Vec<R>,
    /// `guide[j]` is the first index whose cdf exceeds `j / GUIDE_SLOTS` of the total.
    guide: Vec<u32>,
    all_odd: bool,
}

/// Degree sequence with an even sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeSequence {
    pub degrees: Vec<usize>,
    /// Whole-sequence redraws caused by an odd sum.
    pub resamples: usize,
}

impl DegreeSequence {
    pub fn sum(&self) -> usize {
        self.degrees.iter().sum()
    }
}

impl<R: Real> DegreeSampler<R> {
    pub fn new(p: &DegreePmf<R>) -> Self {
        let mut acc = crate::scalar::CompensatedSum::new();
        let cdf = p
            .probs
            .iter()
            .map(|&q| {
                acc.add(q);
                acc.value()
            })
            .collect::<Vec<R>>();
        let total = *cdf.last().expect("non-empty support");
        let guide = (0..GUIDE_SLOTS)
            .map(|j| {
                let level = Self::scaled(total, (j as u64) << (64 - GUIDE_BITS));
                cdf.partition_point(|&c| c <= level) as u32
            })
            .collect();
        let all_odd = p.iter().all(|(k, q)| q == R::zero() || k % 2 == 1);
        Self {
            k_min: p.k_min,
            cdf,
            guide,
            all_odd,
        }
    }

    /// Smallest degree with positive probability.
    pub fn min_degree(&self) -> usize {
        self.k_min + self.cdf.partition_point(|&c| c <= R::zero())
    }

    /// `total` times the uniform in `[0, 1)` carried by the top 53 bits.
    fn scaled(total: R, bits: u64) -> R {
        R::of((bits >> 11) as f64 * f64::EPSILON / 2.0) * total
    }

    /// One draw by inversion; expected `O(1)` through a guide table indexed
    /// by the leading bits of the same uniform.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> usize {
        let last = self.cdf.len() - 1;
        let bits = rng.next_u64();
        let u = Self::scaled(self.cdf[last], bits);
        let j = (bits >> (64 - GUIDE_BITS)) as usize;
        let lo = self.guide[j] as usize;
        let hi = self.guide.get(j + 1).map_or(last, |&g| g as usize);
        let i = if lo == hi {
            lo
        } else {
            lo + self.cdf[lo..hi].partition_point(|&c| c <= u)
        };
        self.k_min + i.min(last)
    }

    /// `n` i.i.d. draws, redrawn in full until their sum is even.
    pub fn sample_sequence<G: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut G,
        cap: usize,
    ) -> Result<DegreeSequence, DegreesError> {
        if n == 0 {
            return Err(DegreesError::InvalidParameter("n must be >= 1".into()));
        }
        if self.all_odd && n % 2 == 1 {
            // Every draw is odd, so the sum is odd for every round.
            return Err(DegreesError::ResampleLimitExceeded { rounds: cap });
        }
        let mut degrees = vec![0; n];
        for round in 0..=cap {
            let mut parity = 0;
            for d in degrees.iter_mut() {
                *d = self.sample(rng);
                parity ^= *d & 1;
            }
            if parity == 0 {
                return Ok(DegreeSequence {
                    degrees,
                    resamples: round,
                });
            }
        }
        Err(DegreesError::ResampleLimitExceeded { rounds: cap })
    }
}

/// i.i.d. degree sequence conditioned on an even sum, default resampling cap.
pub fn sample_degree_sequence<R: Real, G: Rng + ?Sized>(
    p: &DegreePmf<R>,
    n: usize,
    rng: &mut G,
) -> Result<DegreeSequence, DegreesError> {
    DegreeSampler::new(p).sample_sequence(n, rng, DEFAULT_RESAMPLE_CAP)
}
