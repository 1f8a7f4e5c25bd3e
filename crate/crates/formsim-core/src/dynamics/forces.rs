use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::consts::{GM_EARTH, J2_EARTH, OMEGA_EARTH, R_EARTH};

/// Geopotential truncation for the acceleration model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geopotential {
    Kepler,
    J2,
}

/// Atmospheric density model.
///
/// The exponential profile `rho(h) = rho0 * exp(-(h - h0)/H)` stands in for
/// the high-fidelity models; the two presets reproduce the truth-vs-flight
/// drag mismatch (solar-max truth against mean-activity on-board).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragModel {
    Off,
    Exponential {
        /// Reference density [kg/m^3].
        rho0: f64,
        /// Reference altitude [m].
        h0: f64,
        /// Scale height [m].
        scale_height: f64,
    },
}

/// Exponential density preset for mean solar activity (on-board belief).
pub fn density_mean_activity() -> DragModel {
    DragModel::Exponential {
        rho0: 2.0e-13,
        h0: 500e3,
        scale_height: 65e3,
    }
}

/// Exponential density preset for solar-maximum conditions (ground truth).
pub fn density_solar_max() -> DragModel {
    DragModel::Exponential {
        rho0: 8.0e-13,
        h0: 500e3,
        scale_height: 75e3,
    }
}

/// Solar radiation pressure model (off by default at these baselines).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrpModel {
    Off,
    /// Cannonball with a cylindrical Earth shadow and a low-precision
    /// analytic Sun direction.
    Cannonball,
}

/// Third-body gravity model (off by default at these baselines).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdBodyModel {
    Off,
    /// Low-precision analytic lunisolar ephemerides.
    AnalyticLunisolar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceModelConfig {
    pub geopotential: Geopotential,
    pub drag: DragModel,
    pub srp: SrpModel,
    pub third_body: ThirdBodyModel,
    /// 1-sigma accumulated position error per orbit used for covariance
    /// inflation [m].
    pub process_noise_per_orbit: f64,
}

impl ForceModelConfig {
    /// Kepler-only, everything else off.
    pub fn kepler() -> Self {
        Self {
            geopotential: Geopotential::Kepler,
            drag: DragModel::Off,
            srp: SrpModel::Off,
            third_body: ThirdBodyModel::Off,
            process_noise_per_orbit: 0.0,
        }
    }

    /// J2 gravity only.
    pub fn j2() -> Self {
        Self {
            geopotential: Geopotential::J2,
            ..Self::kepler()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.process_noise_per_orbit < 0.0 {
            return Err("process_noise_per_orbit must be >= 0".into());
        }
        if let DragModel::Exponential {
            rho0,
            scale_height,
            ..
        } = self.drag
        {
            if rho0 < 0.0 || scale_height <= 0.0 {
                return Err("exponential drag needs rho0 >= 0 and scale height > 0".into());
            }
        }
        Ok(())
    }
}

/// Mass and aerodynamic/radiation properties of one spacecraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticProperties {
    /// Wet mass [kg].
    pub mass: f64,
    /// Drag coefficient [-].
    pub cd: f64,
    /// Radiation pressure coefficient [-].
    pub cr: f64,
    /// Cross-section area [m^2]; attitude dependence is applied by the
    /// caller through the area callback of the truth propagator.
    pub area: f64,
}

impl BallisticProperties {
    pub fn validate(&self) -> Result<(), String> {
        if self.mass <= 0.0 {
            return Err("mass must be > 0".into());
        }
        if !(0.0..=2.0).contains(&self.area) {
            return Err("cross-section area out of range".into());
        }
        Ok(())
    }

    /// Ballistic coefficient Cd*A/m [m^2/kg] for a given effective area.
    pub fn drag_beta(&self, area: f64) -> f64 {
        self.cd * area / self.mass
    }
}

/// Atmospheric density at geocentric radius `r_mag` [kg/m^3].
pub fn density_at(drag: &DragModel, r_mag: f64) -> f64 {
    match *drag {
        DragModel::Off => 0.0,
        DragModel::Exponential {
            rho0,
            h0,
            scale_height,
        } => {
            let h = r_mag - R_EARTH;
            rho0 * (-(h - h0) / scale_height).exp()
        }
    }
}

/// Very low precision analytic Sun direction (circular ecliptic), unit vector
/// in the inertial frame. `t` is mission time [s] from the scenario epoch.
pub fn sun_direction(t: f64) -> Vector3<f64> {
    // Mean motion of the Sun along the ecliptic, arbitrary phase at t = 0.
    let ecl = 23.439f64.to_radians();
    let lambda = 2.0 * std::f64::consts::PI * t / (365.25 * 86400.0);
    Vector3::new(
        lambda.cos(),
        lambda.sin() * ecl.cos(),
        lambda.sin() * ecl.sin(),
    )
}

/// Low-precision analytic Moon position [m] in the inertial frame.
pub fn moon_position(t: f64) -> Vector3<f64> {
    let incl = 5.145f64.to_radians();
    let lambda = 2.0 * std::f64::consts::PI * t / (27.321 * 86400.0);
    let r = 384_400e3;
    Vector3::new(
        r * lambda.cos(),
        r * lambda.sin() * incl.cos(),
        r * lambda.sin() * incl.sin(),
    )
}

/// Total inertial acceleration of one spacecraft.
///
/// `area` is the effective cross-section for drag and SRP at this instant.
pub fn acceleration(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    t: f64,
    forces: &ForceModelConfig,
    ballistic: &BallisticProperties,
    area: f64,
) -> Vector3<f64> {
    let r_mag = r.norm();
    let mut acc = -GM_EARTH / r_mag.powi(3) * r;

    if forces.geopotential == Geopotential::J2 {
        let z2_r2 = (r.z / r_mag).powi(2);
        let factor = -1.5 * J2_EARTH * GM_EARTH * R_EARTH * R_EARTH / r_mag.powi(5);
        acc += factor
            * Vector3::new(
                r.x * (1.0 - 5.0 * z2_r2),
                r.y * (1.0 - 5.0 * z2_r2),
                r.z * (3.0 - 5.0 * z2_r2),
            );
    }

    let rho = density_at(&forces.drag, r_mag);
    if rho > 0.0 {
        // Velocity relative to the co-rotating atmosphere.
        let omega = Vector3::new(0.0, 0.0, OMEGA_EARTH);
        let v_rel = v - omega.cross(r);
        let v_rel_mag = v_rel.norm();
        acc += -0.5 * rho * ballistic.drag_beta(area) * v_rel_mag * v_rel;
    }

    if forces.srp == SrpModel::Cannonball {
        let sun = sun_direction(t);
        // Cylindrical shadow: no SRP when behind the Earth w.r.t. the Sun.
        let along = r.dot(&sun);
        let lateral = (r - along * sun).norm();
        let lit = along > 0.0 || lateral > R_EARTH;
        if lit {
            const SOLAR_PRESSURE: f64 = 4.56e-6; // N/m^2 at 1 AU
            acc += SOLAR_PRESSURE * ballistic.cr * area / ballistic.mass * sun;
        }
    }

    if forces.third_body == ThirdBodyModel::AnalyticLunisolar {
        const GM_MOON: f64 = 4.9028e12;
        const GM_SUN: f64 = 1.32712440018e20;
        const AU: f64 = 1.495978707e11;
        let sun_pos = sun_direction(t) * AU;
        let moon_pos = moon_position(t);
        for (gm, body) in [(GM_SUN, sun_pos), (GM_MOON, moon_pos)] {
            let d = body - r;
            acc += gm * (d / d.norm().powi(3) - body / body.norm().powi(3));
        }
    }

    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kepler_acceleration_points_inward() {
        let forces = ForceModelConfig::kepler();
        let ball = BallisticProperties {
            mass: 11.35,
            cd: 2.2,
            cr: 1.8,
            area: 0.25,
        };
        let r = Vector3::new(7.0e6, 0.0, 0.0);
        let v = Vector3::new(0.0, 7.5e3, 0.0);
        let a = acceleration(&r, &v, 0.0, &forces, &ball, ball.area);
        assert!(a.x < 0.0 && a.y.abs() < 1e-12 && a.z.abs() < 1e-12);
        assert!((a.norm() - GM_EARTH / 49.0e12).abs() < 1e-9);
    }

    #[test]
    fn j2_acceleration_vanishes_when_kepler_selected() {
        let ball = BallisticProperties {
            mass: 11.35,
            cd: 2.2,
            cr: 1.8,
            area: 0.25,
        };
        let r = Vector3::new(5.0e6, 2.0e6, 4.0e6);
        let v = Vector3::new(1.0e3, 7.0e3, 1.0e3);
        let kep = acceleration(&r, &v, 0.0, &ForceModelConfig::kepler(), &ball, ball.area);
        let j2 = acceleration(&r, &v, 0.0, &ForceModelConfig::j2(), &ball, ball.area);
        let dif = (j2 - kep).norm();
        // J2 perturbation is about 1e-3 of the central term at LEO.
        let central = kep.norm();
        assert!(dif > 1e-4 * central && dif < 5e-3 * central);
    }

    #[test]
    fn density_presets_bracket_each_other() {
        let r = R_EARTH + 500e3;
        let mean = density_at(&density_mean_activity(), r);
        let max = density_at(&density_solar_max(), r);
        assert!(max > 2.0 * mean);
        // Density decays with altitude.
        let higher = density_at(&density_solar_max(), r + 100e3);
        assert!(higher < max);
    }
}
