//! Scalar abstraction for the analytic parts of the crate.
//!
//! Degree laws, closed forms, the uniformization oracle and the regression
//! helpers are written against [`Real`] so they run in `f32` or `f64`. The
//! stochastic engine keeps its clock in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Conversion from a count.
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize converts to any Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<R: Real> {
    sum: R,
    carry: R,
}

impl<R: Real> CompensatedSum<R> {
    pub fn new() -> Self {
        Self {
            sum: R::zero(),
            carry: R::zero(),
        }
    }

    pub fn add(&mut self, x: R) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> R {
        self.sum + self.carry
    }
}

impl<R: Real> FromIterator<R> for CompensatedSum<R> {
    fn from_iter<I: IntoIterator<Item = R>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<R: Real, I: IntoIterator<Item = R>>(iter: I) -> R {
    iter.into_iter().collect::<CompensatedSum<R>>().value()
}
