use nalgebra::{Matrix6, Vector6};

use super::DynamicsError;
use crate::astro::{AbsoluteOrbit, RoeState};
use crate::consts::{J2_EARTH, R_EARTH};

/// Closed-form J2-secular state transition matrix for dimensional ROE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stm {
    pub matrix: Matrix6<f64>,
    pub dt: f64,
}

impl Stm {
    pub fn apply(&self, roe: &RoeState) -> RoeState {
        RoeState::from_vector(&(self.matrix * roe.to_vector()))
    }
}

/// J2-secular ROE state transition matrix over `[t0, t1]` for a near-circular
/// chief.
///
/// Derived by linearizing the secular element rates with respect to the
/// deputy elements: the relative eccentricity vector rotates at the perigee
/// drift rate, dlambda couples to da through both Kepler and J2, and the
/// relative ascending node responds to da and dix through the nodal rate
/// gradients. Setting J2 = 0 recovers the pure Kepler drift coupling
/// dlambda <- -1.5 n da dt.
pub fn stm_j2(chief: &AbsoluteOrbit, t0: f64, t1: f64) -> Stm {
    stm_with_j2(chief, t1 - t0, J2_EARTH)
}

/// Kepler-only STM (J2 coupling terms zeroed).
pub fn stm_kepler(chief: &AbsoluteOrbit, dt: f64) -> Stm {
    stm_with_j2(chief, dt, 0.0)
}

fn stm_with_j2(chief: &AbsoluteOrbit, dt: f64, j2: f64) -> Stm {
    let n = chief.mean_motion();
    let eta2 = 1.0 - chief.e * chief.e;
    let eta = eta2.sqrt();
    let p = chief.a * eta2;
    let kappa = 0.75 * j2 * n * (R_EARTH / p).powi(2);
    let c = chief.i.cos();
    let s = chief.i.sin();

    // Perigee drift rate: the relative eccentricity vector rotation.
    let argp_rate = kappa * (5.0 * c * c - 1.0);

    let mut m = Matrix6::identity();
    // dlambda <- da: Kepler n(a) gradient plus the J2 rate gradients of
    // u_dot + raan_dot * cos(i).
    m[(1, 0)] = -(1.5 * n + 3.5 * kappa * (eta * (3.0 * c * c - 1.0) + (5.0 * c * c - 1.0))
        - 7.0 * kappa * c * c)
        * dt;
    // dlambda <- dix: inclination gradient of u_dot + raan_dot * cos(i).
    m[(1, 4)] = -kappa * s * c * (6.0 * eta + 8.0) * dt;
    // Relative eccentricity vector rotation.
    let (sin_w, cos_w) = (argp_rate * dt).sin_cos();
    m[(2, 2)] = cos_w;
    m[(2, 3)] = -sin_w;
    m[(3, 2)] = sin_w;
    m[(3, 3)] = cos_w;
    // diy <- da and diy <- dix through the nodal rate gradients.
    m[(5, 0)] = 7.0 * kappa * c * s * dt;
    m[(5, 4)] = 2.0 * kappa * s * s * dt;

    Stm { matrix: m, dt }
}

/// Propagate a ROE covariance across `stm` and add process noise sized so
/// that starting from zero the projected 3D position uncertainty reaches
/// `q_per_orbit` after one orbit.
///
/// The process noise matrix integrates white ROE-rate noise through the
/// Kepler drift coupling, so that composing two half-interval inflations
/// agrees with one full-interval inflation.
pub fn inflate_covariance(
    p: &Matrix6<f64>,
    stm: &Stm,
    chief: &AbsoluteOrbit,
    q_per_orbit: f64,
) -> Result<Matrix6<f64>, DynamicsError> {
    if (p - p.transpose()).norm() > 1e-9 * (1.0 + p.norm()) {
        return Err(DynamicsError::NotPositiveSemidefinite);
    }
    // Cheap PSD sanity: negative diagonal is a contract violation.
    if p.diagonal().iter().any(|&d| d < -1e-12) {
        return Err(DynamicsError::NotPositiveSemidefinite);
    }
    let dt = stm.dt;
    let n = chief.mean_motion();
    let period = chief.period();

    // Trace of J Q J^T over one orbit with unit white-noise rate:
    // da and dlambda rows contribute 1 each, the de pair 5, the di pair 1,
    // plus the Kepler-coupled dlambda growth (3 pi)^2 / 3.
    let trace_coeff = 8.0 + (3.0 * std::f64::consts::PI).powi(2) / 3.0;
    let s_rate = q_per_orbit * q_per_orbit / (trace_coeff * period);

    let mut q = Matrix6::from_diagonal(&Vector6::repeat(s_rate * dt));
    let drift = -1.5 * n;
    q[(1, 1)] += s_rate * drift * drift * dt.powi(3) / 3.0;
    q[(0, 1)] += s_rate * drift * dt * dt / 2.0;
    q[(1, 0)] += s_rate * drift * dt * dt / 2.0;

    let mut out = stm.matrix * p * stm.matrix.transpose() + q;
    // Symmetrize against accumulation of rounding.
    out = (out + out.transpose()) * 0.5;
    Ok(out)
}
