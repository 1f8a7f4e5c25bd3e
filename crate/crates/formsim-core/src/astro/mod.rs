//! Orbital element representations and the maps between absolute elements,
//! relative orbital elements (ROE), and RTN-frame relative Cartesian states.
//!
//! Conventions used throughout the crate:
//! * Quasi-nonsingular ROE with `dlambda = (u_d - u_c) + (raan_d - raan_c) cos i_c`,
//!   every component scaled by the chief semi-major axis (meters).
//! * RTN frame centered on the chief: R along the radius vector, N along the
//!   orbital angular momentum, T completing the right-handed triad.
//! * The linear ROE->RTN map is the single source of geometric truth for
//!   control and safety; the nonlinear ECI difference is the ground-truth
//!   geometry in the simulator.

mod orbit;
mod roe;
mod rtn;

pub use orbit::{absolute_from_eci, eci_from_absolute, solve_kepler, AbsoluteOrbit, EciState};
pub use roe::{absolute_from_roe, roe_from_absolute, RoeState};
pub use rtn::{relative_rtn, rtn_basis, rtn_from_roe, RtnState};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AstroError {
    #[error("eccentricity {0} outside near-circular domain (e < {1})")]
    EccentricityOutOfRange(f64, f64),
    #[error("semi-major axis {0} m does not describe an orbit above the Earth surface")]
    SemiMajorAxisTooSmall(f64),
    #[error("kepler solver failed to converge for M={0}, e={1}")]
    KeplerDivergence(f64, f64),
}

/// Wrap an angle to [0, 2*pi).
pub fn wrap_to_2pi(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = angle % two_pi;
    if a < 0.0 {
        a += two_pi;
    }
    a
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_to_pi(angle: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = wrap_to_2pi(angle);
    if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Pluggable mean <-> osculating element conversion.
///
/// The default identity map is adequate at the separations this simulator
/// targets: differential short-period J2 effects stay at the few-meter level
/// for baselines below a kilometer. A numerical-averaging implementation
/// lives in the dynamics module for when the distinction matters.
pub trait MeanOscMap {
    fn osc_to_mean(&self, osc: &AbsoluteOrbit) -> AbsoluteOrbit;
    fn mean_to_osc(&self, mean: &AbsoluteOrbit) -> AbsoluteOrbit;
}

/// Identity mean <-> osculating map (desk-scale default).
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMeanOsc;

impl MeanOscMap for IdentityMeanOsc {
    fn osc_to_mean(&self, osc: &AbsoluteOrbit) -> AbsoluteOrbit {
        *osc
    }
    fn mean_to_osc(&self, mean: &AbsoluteOrbit) -> AbsoluteOrbit {
        *mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_2pi_handles_negatives() {
        assert!((wrap_to_2pi(-0.1) - (std::f64::consts::TAU - 0.1)).abs() < 1e-15);
        assert_eq!(wrap_to_2pi(0.0), 0.0);
    }

    #[test]
    fn wrap_pi_is_signed() {
        assert!((wrap_to_pi(3.5) - (3.5 - std::f64::consts::TAU)).abs() < 1e-15);
        assert!((wrap_to_pi(-0.2) + 0.2).abs() < 1e-15);
    }
}
