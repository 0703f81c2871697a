//! Continuous-time SIS contact process.
//!
//! Infected vertices recover at rate 1; a susceptible vertex becomes infected
//! at rate `lambda` times its number of infected neighbors. The forward
//! engine ([`ContactState`]) is an exact direct-method simulation. The same
//! engine serves as the dual process, since the contact process is
//! self-dual. [`oracle`] solves tiny graphs exactly for cross-checks.

mod closed_form;
mod coupled;
mod forward;
pub mod oracle;
mod star;
mod state;

use thiserror::Error;

pub use closed_form::{p0_closed_form, path_transfer_bound, shifted_geometric_pmf};
pub use coupled::{CoupledPair, CoupledRun};
pub use forward::{
    classify_star, first_infection_time, run_dual, run_forward, run_until_extinction,
    uniform_schedule, DualOutcome,
    Sample, StarClass, StarThresholds, Trajectory,
};
pub use oracle::{duality_gap, exact_survival_tiny, DualityGap, ORACLE_MAX_VERTICES};
pub use star::{
    conditioned_leaf_infected, lower_bound_walk_step, recoveries_before_reinfection,
    run_star_chain, StarChain, StarEvent, StarEventKind, StarRun, StarRunConfig,
};
pub use state::{gillespie_step, ContactState, Event, EventKind};

use crate::graph::GraphError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("no infected vertices: the process is absorbed")]
    EmptyState,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exact oracle limited to {max} vertices, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check_rate(lambda: f64) -> Result<(), DynamicsError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter(format!(
            "infection rate must be finite and non-negative, got {lambda}"
        )))
    }
}

fn check_horizon(horizon: f64) -> Result<(), DynamicsError> {
    if horizon > 0.0 && !horizon.is_nan() {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )))
    }
}
