use nalgebra::{Matrix6, Vector3, Vector6};

use crate::astro::{eci_from_absolute, rtn_basis, AbsoluteOrbit, RoeState};
use crate::dynamics::propagate_mean_elements;
use crate::mission::alignment::NOMINAL_SEPARATION_M;

/// Science observation guidance: a fixed inertial target direction and the
/// machinery that turns it into per-observation alignment targets.
///
/// An observation happens where the chief radius is perpendicular to the
/// target line (the relative position then lies in the local TN plane, where
/// the differential gravity acts along the line of sight and the lateral
/// drift stays small). The observation ROE target puts the deputy at the
/// nominal separation along the target line with its inertial relative
/// velocity parallel to the line.
#[derive(Debug, Clone)]
pub struct ScienceGuidance {
    /// Unit vector from the formation toward the observation target.
    pub target_eci: Vector3<f64>,
    /// Nominal science relative orbit (initial target for the transfer).
    pub nominal_roe: RoeState,
    /// Believed payload positions in the body frames [m].
    pub detector_body: Vector3<f64>,
    pub sieve_body: Vector3<f64>,
    /// Sign of the chief z coordinate at the observation pole.
    pole_sign: f64,
}

impl ScienceGuidance {
    /// Derive the fixed target direction from the nominal science geometry:
    /// the direction of the relative position at the pole-adjacent crossing
    /// of the TN plane, frozen in inertial space at mission start.
    pub fn derive(
        chief0: &AbsoluteOrbit,
        nominal_roe: &RoeState,
        detector_body: Vector3<f64>,
        sieve_body: Vector3<f64>,
    ) -> Self {
        // Observation crossing: where the radial separation vanishes (the
        // relative position lies in the TN plane) at the close approach.
        let mut best: Option<(f64, f64)> = None; // (separation, u)
        let samples = 7200;
        for k in 0..samples {
            let u0 = k as f64 * std::f64::consts::TAU / samples as f64;
            let u1 = (k + 1) as f64 * std::f64::consts::TAU / samples as f64;
            let s0 = crate::astro::rtn_from_roe(chief0, nominal_roe, u0);
            let s1 = crate::astro::rtn_from_roe(chief0, nominal_roe, u1);
            if s0.r_r.signum() != s1.r_r.signum() {
                let u = 0.5 * (u0 + u1);
                let sep = 0.5 * (s0.separation() + s1.separation());
                if best.map(|(bs, _)| sep < bs).unwrap_or(true) {
                    best = Some((sep, u));
                }
            }
        }
        let (_, u_obs) = best.expect("relative orbit crosses the TN plane");

        let mut chief = *chief0;
        chief.mean_anomaly = u_obs - chief.argp;
        let chief_eci = eci_from_absolute(&chief).expect("valid chief");
        let rel = crate::astro::rtn_from_roe(chief0, nominal_roe, u_obs);
        let dir_rtn = rel.position().normalize();
        let target_eci = rtn_basis(&chief_eci).transpose() * dir_rtn;
        ScienceGuidance {
            target_eci,
            nominal_roe: *nominal_roe,
            detector_body,
            sieve_body,
            pole_sign: chief_eci.r.z.signum(),
        }
    }

    /// Next observation epoch after `t_from`: the time when the chief radius
    /// is perpendicular to the target line on the derivation pole side.
    pub fn next_observation_epoch(&self, chief: &AbsoluteOrbit, t_from: f64) -> f64 {
        let period = chief.period();
        let probe = |t: f64| -> (f64, f64) {
            let el = propagate_mean_elements(chief, &crate::dynamics::ForceModelConfig::j2(), None, t)
                .expect("mean propagation");
            let s = eci_from_absolute(&el).expect("valid elements");
            (s.r.normalize().dot(&self.target_eci), s.r.z)
        };
        let step = 30.0;
        let mut t_prev = t_from;
        let (mut f_prev, _) = probe(t_prev);
        let mut t = t_from + step;
        while t < t_from + 1.5 * period {
            let (f, z) = probe(t);
            if f_prev.signum() != f.signum() && z.signum() == self.pole_sign {
                // Bisect the crossing.
                let (mut lo, mut hi) = (t_prev, t);
                let (mut f_lo, _) = probe(lo);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    let (f_mid, _) = probe(mid);
                    if f_mid.signum() == f_lo.signum() {
                        lo = mid;
                        f_lo = f_mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
            t_prev = t;
            f_prev = f;
            t += step;
        }
        // Fallback: one period out.
        t_from + period
    }

    /// Alignment ROE target at the observation epoch: payload centers at the
    /// nominal separation along the target line, inertial relative velocity
    /// parallel to the line, and (within that family) closest to the nominal
    /// science geometry.
    ///
    /// The first-order ROE map leaves O(e * separation) residuals of tens of
    /// centimeters, far above the alignment tolerances, so the linear solve
    /// is polished against the exact nonlinear geometry.
    pub fn alignment_target(&self, chief: &AbsoluteOrbit, t_obs: f64) -> RoeState {
        let el = propagate_mean_elements(chief, &crate::dynamics::ForceModelConfig::j2(), None, t_obs)
            .expect("mean propagation");
        let chief_eci = eci_from_absolute(&el).expect("valid chief");
        let u = el.mean_arg_latitude();
        let n = el.mean_motion();
        let basis = rtn_basis(&chief_eci);
        let t_rtn = basis * self.target_eci;

        // Desired center-of-mass offset: payload separation along the line
        // plus the payload lever arms in observation attitude.
        let att = crate::attitude::observation_attitude(&chief_eci, &self.target_eci);
        let payload_lever = att * (self.detector_body - self.sieve_body);
        let desired_com_eci = self.target_eci * NOMINAL_SEPARATION_M + payload_lever;
        let desired_com_rtn = basis * desired_com_eci;

        // Rows: RTN position map, then the inertial relative velocity map
        //   vi_R = -n (dl + dex sin u - dey cos u)
        //   vi_T =  n (dex cos u + dey sin u - 0.5 da)
        //   vi_N =  n (dix cos u + diy sin u)
        let (su, cu) = u.sin_cos();
        #[rustfmt::skip]
        let m = Matrix6::new(
            1.0,  0.0, -cu,       -su,        0.0, 0.0,
            0.0,  1.0, 2.0 * su,  -2.0 * cu,  0.0, 0.0,
            0.0,  0.0, 0.0,       0.0,        su,  -cu,
            0.0,  -n,  -n * su,   n * cu,     0.0, 0.0,
            -0.5 * n, 0.0, n * cu, n * su,    0.0, 0.0,
            0.0,  0.0, 0.0,       0.0,        n * cu, n * su,
        );
        let m_inv = m.try_inverse().expect("alignment map invertible");
        let nominal = self.nominal_roe.to_vector();

        let solve_linear = |pos_rtn: &Vector3<f64>, vel_corr_rtn: &Vector3<f64>| -> RoeState {
            let mut rhs_pos = Vector6::zeros();
            let mut rhs_vel = Vector6::zeros();
            for k in 0..3 {
                rhs_pos[k] = pos_rtn[k];
                rhs_pos[3 + k] = vel_corr_rtn[k];
                rhs_vel[3 + k] = t_rtn[k];
            }
            let a = m_inv * rhs_pos;
            let b = m_inv * rhs_vel;
            let s = -(a - nominal).dot(&b) / b.dot(&b).max(1e-30);
            RoeState::from_vector(&(a + b * s))
        };

        // Fixed-point polish against the exact element geometry.
        let mut pos_rhs = desired_com_rtn;
        let mut vel_corr = Vector3::zeros();
        let mut target = solve_linear(&pos_rhs, &vel_corr);
        for _ in 0..4 {
            let deputy = match crate::astro::absolute_from_roe(&el, &target) {
                Ok(d) => d,
                Err(_) => break,
            };
            let d_eci = eci_from_absolute(&deputy).expect("valid deputy");
            let rel = d_eci.r - chief_eci.r;
            let v_rel = d_eci.v - chief_eci.v;
            let pos_err = basis * (desired_com_eci - rel);
            let v_perp = v_rel - self.target_eci * v_rel.dot(&self.target_eci);
            pos_rhs += pos_err;
            vel_corr -= basis * v_perp;
            target = solve_linear(&pos_rhs, &vel_corr);
        }
        target
    }
}
