//! Per-spacecraft navigation filter: an EKF over both spacecraft's inertial
//! states, empirical accelerations, receiver clocks, antenna offsets, and
//! carrier-phase float ambiguities, updated with GRAPHIC and single-
//! difference carrier-phase measurements and sharpened by integer ambiguity
//! resolution on the double differences.

mod filter;
mod iar;
mod output;
mod state;

pub use filter::{measurement_update_graphic, measurement_update_sdcp, time_update, UpdateStats};
pub use iar::{decorrelate, ils_search, resolve_integers, IarResult, IarStatus, RATIO_THRESHOLD};
pub use output::{covariance_asymmetry, relative_output};
pub use state::{Blocks, NavConfig, NavState, Slot, MAX_AMBIGUITIES, STATE_DIM};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("filter needs at least one valid measurement")]
    NoMeasurements,
    #[error("all measurements were gated out")]
    AllGated,
    #[error(transparent)]
    Astro(#[from] crate::astro::AstroError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}
