use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{wrap_to_2pi, AstroError};
use crate::consts::{GM_EARTH, R_EARTH};

/// Keplerian osculating elements of one spacecraft, angles in radians.
///
/// `mean_anomaly` is stored rather than true anomaly so that secular
/// propagation is linear in time; `epoch` is continuous mission time in
/// seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteOrbit {
    /// Semi-major axis [m].
    pub a: f64,
    /// Eccentricity [-].
    pub e: f64,
    /// Inclination [rad].
    pub i: f64,
    /// Right ascension of the ascending node [rad].
    pub raan: f64,
    /// Argument of perigee [rad].
    pub argp: f64,
    /// Mean anomaly [rad].
    pub mean_anomaly: f64,
    /// Mission time of these elements [s].
    pub epoch: f64,
}

/// Inertial Cartesian state [m, m/s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EciState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl AbsoluteOrbit {
    /// Construct with angle normalization and invariant checks.
    pub fn new(
        a: f64,
        e: f64,
        i: f64,
        raan: f64,
        argp: f64,
        mean_anomaly: f64,
        epoch: f64,
    ) -> Result<Self, AstroError> {
        if !(a > R_EARTH) {
            return Err(AstroError::SemiMajorAxisTooSmall(a));
        }
        if !(0.0..1.0).contains(&e) {
            return Err(AstroError::EccentricityOutOfRange(e, 1.0));
        }
        Ok(Self {
            a,
            e,
            i: wrap_to_2pi(i),
            raan: wrap_to_2pi(raan),
            argp: wrap_to_2pi(argp),
            mean_anomaly: wrap_to_2pi(mean_anomaly),
            epoch,
        })
    }

    /// Mean motion n = sqrt(mu / a^3) [rad/s].
    pub fn mean_motion(&self) -> f64 {
        (GM_EARTH / self.a.powi(3)).sqrt()
    }

    /// Orbital period [s].
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }

    /// Mean argument of latitude u = argp + M, wrapped to [0, 2*pi).
    pub fn mean_arg_latitude(&self) -> f64 {
        wrap_to_2pi(self.argp + self.mean_anomaly)
    }

    /// Eccentric anomaly via Newton iteration on Kepler's equation.
    pub fn eccentric_anomaly(&self) -> Result<f64, AstroError> {
        solve_kepler(self.mean_anomaly, self.e)
    }

    /// Radius magnitude at the current mean anomaly [m].
    pub fn radius(&self) -> Result<f64, AstroError> {
        let ea = self.eccentric_anomaly()?;
        Ok(self.a * (1.0 - self.e * ea.cos()))
    }
}

/// Solve E - e*sin(E) = M for the eccentric anomaly E.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64, AstroError> {
    let m = wrap_to_2pi(mean_anomaly);
    let mut ea = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..50 {
        let f = ea - e * ea.sin() - m;
        let fp = 1.0 - e * ea.cos();
        let step = f / fp;
        ea -= step;
        if step.abs() < 1e-14 {
            return Ok(ea);
        }
    }
    Err(AstroError::KeplerDivergence(m, e))
}

/// Element -> Cartesian conversion (two-body geometry).
pub fn eci_from_absolute(orbit: &AbsoluteOrbit) -> Result<EciState, AstroError> {
    let ea = orbit.eccentric_anomaly()?;
    let (a, e) = (orbit.a, orbit.e);
    let eta = (1.0 - e * e).sqrt();
    let r_mag = a * (1.0 - e * ea.cos());

    // Perifocal position and velocity.
    let r_pf = Vector3::new(a * (ea.cos() - e), a * eta * ea.sin(), 0.0);
    let v_scale = (GM_EARTH * a).sqrt() / r_mag;
    let v_pf = Vector3::new(-v_scale * ea.sin(), v_scale * eta * ea.cos(), 0.0);

    let rot = perifocal_to_eci(orbit.i, orbit.raan, orbit.argp);
    Ok(EciState {
        r: rot * r_pf,
        v: rot * v_pf,
    })
}

/// Cartesian -> element conversion, inverse of [`eci_from_absolute`].
pub fn absolute_from_eci(state: &EciState, epoch: f64) -> Result<AbsoluteOrbit, AstroError> {
    let r = state.r;
    let v = state.v;
    let r_mag = r.norm();
    if r_mag <= R_EARTH {
        return Err(AstroError::SemiMajorAxisTooSmall(r_mag));
    }
    let v2 = v.norm_squared();
    let h = r.cross(&v);
    let h_mag = h.norm();

    let a = 1.0 / (2.0 / r_mag - v2 / GM_EARTH);
    if !(a > R_EARTH) {
        return Err(AstroError::SemiMajorAxisTooSmall(a));
    }
    let e_vec = ((v2 - GM_EARTH / r_mag) * r - r.dot(&v) * v) / GM_EARTH;
    let e = e_vec.norm();
    if e >= 1.0 {
        return Err(AstroError::EccentricityOutOfRange(e, 1.0));
    }

    let i = (h.z / h_mag).acos();
    // Node vector k x h = (-h_y, h_x, 0).
    let n_vec = Vector3::new(-h.y, h.x, 0.0);
    let n_mag = n_vec.norm();

    let raan = if n_mag > 1e-12 {
        wrap_to_2pi(n_vec.y.atan2(n_vec.x))
    } else {
        0.0
    };

    // Argument of latitude of the position (angle from node to r in-plane).
    let node_unit = if n_mag > 1e-12 {
        n_vec / n_mag
    } else {
        Vector3::new(1.0, 0.0, 0.0)
    };
    let in_plane_y = h.cross(&node_unit).normalize();
    let u_true = (r.dot(&in_plane_y)).atan2(r.dot(&node_unit));

    // True anomaly from the eccentricity vector; degenerate e -> measure from node.
    let nu = if e > 1e-12 {
        let cos_nu = e_vec.dot(&r) / (e * r_mag);
        let sign = if r.dot(&v) >= 0.0 { 1.0 } else { -1.0 };
        sign * cos_nu.clamp(-1.0, 1.0).acos()
    } else {
        u_true
    };
    let argp = wrap_to_2pi(u_true - nu);

    // Eccentric and mean anomaly.
    let ea = 2.0 * ((nu / 2.0).tan() * ((1.0 - e) / (1.0 + e)).sqrt()).atan();
    let mean_anomaly = wrap_to_2pi(ea - e * ea.sin());

    AbsoluteOrbit::new(a, e, i, raan, argp, mean_anomaly, epoch)
}

fn perifocal_to_eci(i: f64, raan: f64, argp: f64) -> Matrix3<f64> {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}
