use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::astro::EciState;

/// Alignment requirement thresholds.
pub const POINTING_LIMIT_M: f64 = 0.018;
pub const LATERAL_VELOCITY_LIMIT: f64 = 2.0e-4;
pub const FOCUS_LIMIT_M: f64 = 0.015;
pub const NOMINAL_SEPARATION_M: f64 = 40.0;

/// Body-frame payload geometry with the truth error realizations: the
/// center-of-mass knowledge error shifts every body-frame coordinate, the
/// mounting errors shift the payload reference points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalGeometry {
    /// Detector aperture center in the believed DSC body frame [m].
    pub detector_body: Vector3<f64>,
    /// Photon-sieve pattern center in the believed OSC body frame [m].
    pub sieve_body: Vector3<f64>,
    /// True-minus-believed center of mass, DSC body frame [m].
    pub com_error_dsc: Vector3<f64>,
    /// True-minus-believed center of mass, OSC body frame [m].
    pub com_error_osc: Vector3<f64>,
    /// Payload mounting position errors [m].
    pub mount_error_dsc: Vector3<f64>,
    pub mount_error_osc: Vector3<f64>,
}

impl InternalGeometry {
    /// True body-frame detector position relative to the true center of
    /// mass.
    pub fn detector_true_body(&self) -> Vector3<f64> {
        self.detector_body + self.mount_error_dsc - self.com_error_dsc
    }

    pub fn sieve_true_body(&self) -> Vector3<f64> {
        self.sieve_body + self.mount_error_osc - self.com_error_osc
    }
}

/// One truth sample inside the observation window.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentSample {
    pub t: f64,
    pub dsc: EciState,
    pub osc: EciState,
    pub att_dsc: Matrix3<f64>,
    pub att_osc: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMetrics {
    /// Worst perpendicular deviation of the sieve center from the
    /// detector-to-target line over the window [m].
    pub pointing_offset: f64,
    /// Worst inertial relative velocity perpendicular to the line of sight
    /// [m/s].
    pub lateral_velocity: f64,
    /// Worst |separation - 40 m| between the payload centers [m].
    pub focus_error: f64,
    pub success: bool,
}

/// Evaluate one observation window against the three alignment
/// requirements, from ground-truth states and the realized internal
/// geometry.
pub fn evaluate_alignment(
    samples: &[AlignmentSample],
    target: &Vector3<f64>,
    geometry: &InternalGeometry,
) -> AlignmentMetrics {
    let t_hat = target.normalize();
    let mut pointing: f64 = 0.0;
    let mut lateral: f64 = 0.0;
    let mut focus: f64 = 0.0;

    for s in samples {
        let detector = s.dsc.r + s.att_dsc * geometry.detector_true_body();
        let sieve = s.osc.r + s.att_osc * geometry.sieve_true_body();
        let rel = sieve - detector;

        // Perpendicular deviation from the detector-target line.
        let perp = rel - t_hat * rel.dot(&t_hat);
        pointing = pointing.max(perp.norm());

        // Inertial relative velocity perpendicular to the line of sight.
        let v_rel = s.osc.v - s.dsc.v;
        let v_perp = v_rel - t_hat * v_rel.dot(&t_hat);
        lateral = lateral.max(v_perp.norm());

        focus = focus.max((rel.norm() - NOMINAL_SEPARATION_M).abs());
    }

    AlignmentMetrics {
        pointing_offset: pointing,
        lateral_velocity: lateral,
        focus_error: focus,
        success: pointing <= POINTING_LIMIT_M
            && lateral <= LATERAL_VELOCITY_LIMIT
            && focus <= FOCUS_LIMIT_M,
    }
}
