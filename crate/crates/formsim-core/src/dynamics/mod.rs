//! Orbit propagation at the three fidelity levels used by the simulator:
//! ground-truth numerical integration in Cartesian space, on-board mean
//! element propagation, and the closed-form J2-secular state transition
//! matrix for relative orbital elements.

pub mod forces;
mod mean;
mod stm;
mod truth;

pub use forces::{
    density_mean_activity, density_solar_max, BallisticProperties, DragModel, ForceModelConfig,
    Geopotential, SrpModel, ThirdBodyModel,
};
pub use mean::{
    mean_arg_lat_at, mean_arg_lat_rate, propagate_mean_elements, propagate_onboard_mean,
};
pub use stm::{inflate_covariance, stm_j2, stm_kepler, Stm};
pub use truth::{propagate_truth, ImpulsiveBurn, TruthState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("propagation step size underflow at t={0}")]
    StepSizeUnderflow(f64),
    #[error("propagation produced a non-finite state at t={0}")]
    NonFiniteState(f64),
    #[error("covariance input is not symmetric positive semidefinite")]
    NotPositiveSemidefinite,
    #[error(transparent)]
    Astro(#[from] crate::astro::AstroError),
}
