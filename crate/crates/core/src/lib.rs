//! SIS contact process on configuration-model random graphs.
//!
//! - [`degrees`]: truncated power-law degree laws, size-biased transform,
//!   even-sum degree sequences.
//! - [`graph`]: configuration model conditioned on simplicity, connectivity,
//!   exact diameter, cluster exposure, star sets.
//! - [`dynamics`]: exact event-driven engine (forward and dual), star chain,
//!   closed forms, coupled mode, and the exact tiny-graph oracle.
//! - [`estimators`]: Monte Carlo estimates with Wilson intervals, density
//!   exponent fits, persistence times, diameter scans.
//!
//! The analytic layers are generic over [`Real`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degrees;
pub mod dynamics;
pub mod estimators;
pub mod graph;
pub mod records;
pub mod scalar;
pub mod seed;

pub use degrees::{DegreePmf, SizeBiasedPmf};
pub use dynamics::{ContactState, DynamicsError, Trajectory};
pub use estimators::{EstimatorError, ExponentFit, SurvivalEstimate};
pub use graph::{Graph, GraphError};
pub use scalar::Real;

pub type DegreePmf64 = DegreePmf<f64>;
pub type DegreePmf32 = DegreePmf<f32>;
pub type SizeBiasedPmf64 = SizeBiasedPmf<f64>;
pub type SizeBiasedPmf32 = SizeBiasedPmf<f32>;
pub type ExponentFit64 = ExponentFit<f64>;
pub type ExponentFit32 = ExponentFit<f32>;
pub type DualityGap64 = dynamics::DualityGap<f64>;
pub type DualityGap32 = dynamics::DualityGap<f32>;
