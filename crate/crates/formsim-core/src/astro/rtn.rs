use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{AbsoluteOrbit, EciState, RoeState};

/// Relative Cartesian state in the chief-centered RTN frame [m, m/s].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RtnState {
    pub r_r: f64,
    pub r_t: f64,
    pub r_n: f64,
    pub v_r: f64,
    pub v_t: f64,
    pub v_n: f64,
}

impl RtnState {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.r_r, self.r_t, self.r_n)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.v_r, self.v_t, self.v_n)
    }

    pub fn separation(&self) -> f64 {
        self.position().norm()
    }

    pub fn rn_separation(&self) -> f64 {
        self.r_r.hypot(self.r_n)
    }
}

/// First-order near-circular map from ROE to the RTN relative state at mean
/// argument of latitude `u`.
///
/// Position:
///   r_R = da - dex cos u - dey sin u
///   r_T = dlambda + 2 dex sin u - 2 dey cos u
///   r_N = dix sin u - diy cos u
/// Velocity is the time derivative including the -3/2 n da along-track drift
/// term, which makes the map exactly consistent with the impulsive GVE input
/// matrix: applying a velocity impulse through the Gamma matrix and mapping
/// back through this function reproduces the impulse.
pub fn rtn_from_roe(chief: &AbsoluteOrbit, roe: &RoeState, u: f64) -> RtnState {
    let n = chief.mean_motion();
    let (su, cu) = u.sin_cos();
    RtnState {
        r_r: roe.da - roe.dex * cu - roe.dey * su,
        r_t: roe.dlambda + 2.0 * roe.dex * su - 2.0 * roe.dey * cu,
        r_n: roe.dix * su - roe.diy * cu,
        v_r: n * (roe.dex * su - roe.dey * cu),
        v_t: n * (2.0 * roe.dex * cu + 2.0 * roe.dey * su - 1.5 * roe.da),
        v_n: n * (roe.dix * cu + roe.diy * su),
    }
}

/// Rotation matrix whose rows are the R, T, N unit vectors of `state`;
/// multiplying an ECI vector yields its RTN components.
pub fn rtn_basis(state: &EciState) -> Matrix3<f64> {
    let r_hat = state.r.normalize();
    let h = state.r.cross(&state.v);
    let n_hat = h.normalize();
    let t_hat = n_hat.cross(&r_hat);
    Matrix3::from_rows(&[r_hat.transpose(), t_hat.transpose(), n_hat.transpose()])
}

/// Nonlinear relative state of `deputy` with respect to `chief`, expressed in
/// the chief RTN frame with the frame rotation removed from the velocity.
pub fn relative_rtn(chief: &EciState, deputy: &EciState) -> RtnState {
    let basis = rtn_basis(chief);
    let rho = deputy.r - chief.r;
    let omega = chief.r.cross(&chief.v) / chief.r.norm_squared();
    let v_rel = deputy.v - chief.v - omega.cross(&rho);
    let p = basis * rho;
    let v = basis * v_rel;
    RtnState {
        r_r: p.x,
        r_t: p.y,
        r_n: p.z,
        v_r: v.x,
        v_t: v.y,
        v_n: v.z,
    }
}
