//! Kinematic attitude profile: zenith-pointing cruise, observation pointing
//! at a fixed inertial target, and rate-limited slews between the two.
//!
//! Attitude feeds three things only: the GNSS antenna boresight (visibility),
//! the body-to-inertial rotation for antenna and payload offsets, and the
//! drag cross-section blend. Bus-level attitude control is out of scope.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::astro::EciState;

/// Nominal slew rate limit [rad/s].
pub const SLEW_RATE: f64 = 1.5 * std::f64::consts::PI / 180.0;

/// Attitude settling margin before an observation [s].
pub const SETTLE_MARGIN_S: f64 = 45.0;

/// One scheduled observation pointing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingWindow {
    /// Observation start [s]; the slew completes SETTLE_MARGIN_S before.
    pub obs_start: f64,
    /// Observation end [s]; the slew back begins here.
    pub obs_end: f64,
    /// Inertial unit vector toward the observation target.
    pub target: Vector3<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct AttitudeProfile {
    windows: Vec<PointingWindow>,
}

impl AttitudeProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register an observation window; windows must be pushed in time order.
    pub fn push_window(&mut self, window: PointingWindow) {
        debug_assert!(self
            .windows
            .last()
            .map(|w| w.obs_end <= window.obs_start)
            .unwrap_or(true));
        self.windows.push(window);
        // Keep only a bounded history.
        if self.windows.len() > 64 {
            self.windows.remove(0);
        }
    }

    /// Body-to-inertial rotation at time `t` for a spacecraft at `state`.
    ///
    /// Body convention: +Z is the GNSS antenna boresight (zenith in cruise),
    /// +X is the payload axis (along-track in cruise, at the target during
    /// observations).
    pub fn body_to_eci(&self, t: f64, state: &EciState) -> Matrix3<f64> {
        let zenith = zenith_attitude(state);
        let Some(w) = self.active_window(t) else {
            return zenith;
        };
        let obs = observation_attitude(state, &w.target);

        let q_zen = UnitQuaternion::from_matrix(&zenith);
        let q_obs = UnitQuaternion::from_matrix(&obs);
        let slew_angle = q_zen.angle_to(&q_obs);
        let slew_time = (slew_angle / SLEW_RATE).max(1.0);

        let slew_in_start = w.obs_start - SETTLE_MARGIN_S - slew_time;
        let slew_in_end = w.obs_start - SETTLE_MARGIN_S;
        let slew_out_start = w.obs_end;
        let slew_out_end = w.obs_end + slew_time;

        let fraction = if t < slew_in_start {
            0.0
        } else if t < slew_in_end {
            (t - slew_in_start) / slew_time
        } else if t <= slew_out_start {
            1.0
        } else if t < slew_out_end {
            1.0 - (t - slew_out_start) / slew_time
        } else {
            0.0
        };
        if fraction <= 0.0 {
            return zenith;
        }
        if fraction >= 1.0 {
            return obs;
        }
        q_zen.slerp(&q_obs, fraction).to_rotation_matrix().into_inner()
    }

    /// Cross-section blend in [0, 1]: 0 in cruise attitude, 1 at observation
    /// attitude (used for the attitude-dependent drag area).
    pub fn area_blend(&self, t: f64, state: &EciState) -> f64 {
        let Some(w) = self.active_window(t) else {
            return 0.0;
        };
        let zenith = zenith_attitude(state);
        let obs = observation_attitude(state, &w.target);
        let current = self.body_to_eci(t, state);
        let q_z = UnitQuaternion::from_matrix(&zenith);
        let q_o = UnitQuaternion::from_matrix(&obs);
        let q_c = UnitQuaternion::from_matrix(&current);
        let full = q_z.angle_to(&q_o);
        if full < 1e-9 {
            return 0.0;
        }
        (q_z.angle_to(&q_c) / full).clamp(0.0, 1.0)
    }

    /// GNSS antenna boresight (body +Z) in the inertial frame.
    pub fn boresight_eci(&self, t: f64, state: &EciState) -> Vector3<f64> {
        self.body_to_eci(t, state) * Vector3::z()
    }

    fn active_window(&self, t: f64) -> Option<&PointingWindow> {
        // A window influences attitude from well before obs_start (slew +
        // settling) until shortly after obs_end.
        self.windows.iter().find(|w| {
            let lead = SETTLE_MARGIN_S + std::f64::consts::PI / SLEW_RATE;
            t >= w.obs_start - lead - 1.0 && t <= w.obs_end + std::f64::consts::PI / SLEW_RATE
        })
    }
}

/// Cruise attitude: +Z zenith, +X completing with the velocity direction.
pub fn zenith_attitude(state: &EciState) -> Matrix3<f64> {
    let z = state.r.normalize();
    let x = (state.v - z * state.v.dot(&z)).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Observation attitude: +X at the target, +Z as close to zenith as the
/// orthogonality constraint allows.
pub fn observation_attitude(state: &EciState, target: &Vector3<f64>) -> Matrix3<f64> {
    let x = target.normalize();
    let zenith = state.r.normalize();
    let mut z = zenith - x * zenith.dot(&x);
    if z.norm() < 1e-9 {
        z = state.v - x * state.v.dot(&x);
    }
    let z = z.normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}
