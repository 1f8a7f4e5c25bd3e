use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::consts::{OMEGA_EARTH, SPEED_OF_LIGHT};

/// Eight-coefficient Klobuchar ionospheric model with fixed broadcast-style
/// coefficients. All angles inside follow the model's semicircle convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlobucharModel {
    pub alpha: [f64; 4],
    pub beta: [f64; 4],
}

impl Default for KlobucharModel {
    fn default() -> Self {
        // Representative mid-activity broadcast coefficients.
        KlobucharModel {
            alpha: [0.3820e-7, 0.1490e-7, -0.1790e-6, 0.0],
            beta: [0.1430e6, 0.0, -0.3280e6, 0.1130e6],
        }
    }
}

impl KlobucharModel {
    pub fn zeroed() -> Self {
        KlobucharModel {
            alpha: [0.0; 4],
            beta: [0.0; 4],
        }
    }
}

/// Slant ionospheric group delay [m] between an Earth-fixed-ish receiver and
/// a satellite, both given as inertial positions at mission time `t`.
///
/// The Earth frame is a simple rotation by OMEGA_EARTH * t; geodetic
/// coordinates use a spherical Earth. Delay is nonnegative, with the model's
/// 5 ns night floor.
pub fn klobuchar_delay(
    model: &KlobucharModel,
    receiver_eci: &Vector3<f64>,
    sat_eci: &Vector3<f64>,
    t: f64,
) -> f64 {
    // Rotate into the Earth-fixed frame.
    let theta = OMEGA_EARTH * t;
    let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), -theta);
    let r_ecef = rot * receiver_eci;
    let s_ecef = rot * sat_eci;

    let r_norm = r_ecef.norm();
    let lat = (r_ecef.z / r_norm).asin();
    let lon = r_ecef.y.atan2(r_ecef.x);

    // Azimuth/elevation in the local ENU frame.
    let up = r_ecef / r_norm;
    let east = Vector3::z().cross(&up).normalize();
    let north = up.cross(&east);
    let los = (s_ecef - r_ecef).normalize();
    let elevation = los.dot(&up).clamp(-1.0, 1.0).asin();
    let azimuth = los.dot(&east).atan2(los.dot(&north));

    // Semicircle units from here on.
    let e_sc = (elevation / std::f64::consts::PI).max(0.0);
    let phi_u = lat / std::f64::consts::PI;
    let lambda_u = lon / std::f64::consts::PI;

    let psi = 0.0137 / (e_sc + 0.11) - 0.022;
    let phi_i = (phi_u + psi * azimuth.cos()).clamp(-0.416, 0.416);
    let lambda_i = lambda_u + psi * azimuth.sin() / (phi_i * std::f64::consts::PI).cos();
    let phi_m = phi_i + 0.064 * ((lambda_i - 1.617) * std::f64::consts::PI).cos();

    // Local time at the pierce point [s]; mission time stands in for GPS
    // time of day.
    let mut t_loc = 4.32e4 * lambda_i + t;
    t_loc = t_loc.rem_euclid(86_400.0);

    let obliquity = 1.0 + 16.0 * (0.53 - e_sc).powi(3);

    let mut amp = 0.0;
    let mut per = 0.0;
    let mut phi_pow = 1.0;
    for n in 0..4 {
        amp += model.alpha[n] * phi_pow;
        per += model.beta[n] * phi_pow;
        phi_pow *= phi_m;
    }
    let amp = amp.max(0.0);
    let per = per.max(72_000.0);

    let x = std::f64::consts::TAU * (t_loc - 50_400.0) / per;
    let delay_s = if x.abs() < 1.57 {
        obliquity * (5.0e-9 + amp * (1.0 - x * x / 2.0 + x.powi(4) / 24.0))
    } else {
        obliquity * 5.0e-9
    };
    delay_s * SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::R_EARTH;

    fn zenith_pair(lat: f64) -> (Vector3<f64>, Vector3<f64>) {
        let up = Vector3::new(lat.cos(), 0.0, lat.sin());
        let r = up * (R_EARTH + 500e3);
        let s = up * 26_560e3;
        (r, s)
    }

    #[test]
    fn night_branch_gives_five_ns_floor() {
        let model = KlobucharModel::default();
        let (r, s) = zenith_pair(0.3);
        // Pick a time deep in the local night: x is far outside +-1.57.
        let mut found_floor = false;
        for t in [0.0f64, 10_000.0, 20_000.0, 70_000.0, 80_000.0] {
            let d = klobuchar_delay(&model, &r, &s, t);
            let floor = 5.0e-9 * SPEED_OF_LIGHT;
            if (d / floor - 1.0).abs() < 0.01 {
                found_floor = true;
            }
            assert!(d >= floor * 0.99, "delay below floor at t={t}");
        }
        assert!(found_floor, "no epoch hit the night floor");
    }

    #[test]
    fn zero_coefficients_are_night_floor_everywhere() {
        // With zeroed coefficients the delay is the 5 ns floor scaled by the
        // obliquity factor (1.0004 at zenith).
        let model = KlobucharModel::zeroed();
        let (r, s) = zenith_pair(-0.7);
        for t in (0..24).map(|h| h as f64 * 3600.0) {
            let d = klobuchar_delay(&model, &r, &s, t);
            let floor = 5.0e-9 * SPEED_OF_LIGHT;
            assert!(
                (d / floor - 1.0).abs() < 2e-3,
                "t={t}: delay {d} vs floor {floor}"
            );
        }
    }

    #[test]
    fn low_elevation_obliquity_doubles_the_delay() {
        // Zero coefficients isolate the obliquity factor: the slant/zenith
        // ratio equals F(10 deg)/F(90 deg) ~ 2.7.
        let model = KlobucharModel::zeroed();
        let lat = 0.2f64;
        let up = Vector3::new(lat.cos(), 0.0, lat.sin());
        let r = up * (R_EARTH + 500e3);
        let s_zenith = up * 26_560e3;
        let east = Vector3::z().cross(&up).normalize();
        let el = 10f64.to_radians();
        let s_low = r + (up * el.sin() + east * el.cos()) * 2.0e7;
        for t in (0..6).map(|h| h as f64 * 14_400.0) {
            let dz = klobuchar_delay(&model, &r, &s_zenith, t);
            let dl = klobuchar_delay(&model, &r, &s_low, t);
            assert!(dl / dz > 2.0, "t={t}: slant/zenith ratio {}", dl / dz);
        }
    }
}
