//! Passive-safety engine: the closed-form minimum RN-plane separation from
//! the relative eccentricity/inclination geometry, the propagated q-sigma
//! control-free safety check, and the violation monitor with hysteresis.

use nalgebra::{Matrix2, Matrix6, Vector2};
use serde::{Deserialize, Serialize};

use crate::astro::{rtn_from_roe, AbsoluteOrbit, RoeState};
use crate::dynamics::{
    inflate_covariance, propagate_onboard_mean, stm_j2, BallisticProperties, DynamicsError,
    ForceModelConfig,
};

/// Plane in which safe separation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyPlane {
    Rn,
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    /// Control-free look-ahead horizon [s].
    pub horizon_s: f64,
    pub plane: SafetyPlane,
    /// Minimum required separation epsilon [m].
    pub min_separation: f64,
    /// Confidence multiplier q on the projected position uncertainty.
    pub confidence_q: f64,
    /// Monitor cadence [s].
    pub check_period_s: f64,
    /// Horizon sampling step [s].
    pub sample_step_s: f64,
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_separation <= 0.0 {
            return Err("min_separation must be > 0".into());
        }
        if !(0.0..=5.0).contains(&self.confidence_q) {
            return Err("confidence_q must lie in [0, 5]".into());
        }
        if self.check_period_s <= 0.0 || self.horizon_s <= 0.0 {
            return Err("check period and horizon must be > 0".into());
        }
        if !(1.0..=60.0).contains(&self.sample_step_s) {
            return Err("sample step must lie in [1, 60] s".into());
        }
        Ok(())
    }
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            horizon_s: 1.5 * 3600.0,
            plane: SafetyPlane::Rn,
            min_separation: 5.0,
            confidence_q: 3.0,
            check_period_s: 10.0,
            sample_step_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub safe: bool,
    /// Worst-case (separation - q sigma - epsilon) over the horizon [m].
    pub min_margin: f64,
    /// Mission time of the closest (least-margin) approach [s].
    pub time_of_closest_approach: f64,
    pub plane: SafetyPlane,
}

/// Closed-form minimum RN-plane distance over the relative orbit described
/// by `roe`, ignoring along-track position.
///
/// The RN locus is the image of the unit circle under a 2x2 linear map,
/// shifted radially by da. The minimum distance to the origin follows from
/// the singular value decomposition of that map and the quartic stationarity
/// condition of the point-to-ellipse distance, solved exactly through the
/// companion-matrix eigenvalues.
pub fn ei_separation_min_rn(roe: &RoeState) -> f64 {
    let e_mag = roe.de_norm();
    let i_mag = roe.di_norm();
    let theta_e = if e_mag > 0.0 {
        roe.dey.atan2(roe.dex)
    } else {
        0.0
    };
    let theta_i = if i_mag > 0.0 {
        roe.diy.atan2(roe.dix)
    } else {
        0.0
    };
    let delta = theta_i - theta_e;

    // [r_R - da; r_N] = A [cos(phi); sin(phi)] with phi = u - theta_e.
    let a = Matrix2::new(-e_mag, 0.0, -i_mag * delta.sin(), i_mag * delta.cos());
    let center = Vector2::new(roe.da, 0.0);

    // SVD of the 2x2 map.
    let svd = a.svd(true, true);
    let u = svd.u.unwrap();
    let sigma = svd.singular_values;
    // Point expressed in the principal frame; locus is w1^2/s1^2 + w2^2/s2^2 = 1.
    let p0 = -(u.transpose() * center);

    min_distance_point_to_ellipse(p0[0], p0[1], sigma[0], sigma[1])
}

/// Minimum distance from point (px, py) to the axis-aligned ellipse with
/// semi-axes (sa >= sb >= 0), including the degenerate segment case.
fn min_distance_point_to_ellipse(px: f64, py: f64, sa: f64, sb: f64) -> f64 {
    if sa < 1e-12 {
        // Locus collapses to a point at the origin.
        return px.hypot(py);
    }
    if sb < 1e-12 {
        // Segment [-sa, sa] on the x axis.
        let clamped = px.clamp(-sa, sa);
        return (px - clamped).hypot(py);
    }

    // Stationarity of |(sa cos t, sb sin t) - p|^2 as a quartic in
    // tan(t/2):  sb*py*u^4 + (2 sa px - 2K) u^3 + (2K + 2 sa px) u - sb*py = 0
    // with K = sb^2 - sa^2.
    let k = sb * sb - sa * sa;
    let c4 = sb * py;
    let c3 = 2.0 * sa * px - 2.0 * k;
    let c2 = 0.0;
    let c1 = 2.0 * k + 2.0 * sa * px;
    let c0 = -sb * py;

    let mut best = f64::INFINITY;
    let mut consider = |t: f64| {
        let d = (sa * t.cos() - px).hypot(sb * t.sin() - py);
        if d < best {
            best = d;
        }
    };
    // t = pi corresponds to u -> infinity.
    consider(std::f64::consts::PI);

    let roots = quartic_real_roots(c4, c3, c2, c1, c0);
    for u in roots {
        consider(2.0 * u.atan());
    }
    best
}

/// Real roots of c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0 via the companion
/// matrix (falls back to the cubic/quadratic when leading terms vanish).
fn quartic_real_roots(c4: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let coeffs = [c4, c3, c2, c1, c0];
    let first_nonzero = coeffs
        .iter()
        .position(|c| c.abs() > 1e-14)
        .unwrap_or(coeffs.len());
    let reduced: Vec<f64> = coeffs[first_nonzero..].to_vec();
    let degree = reduced.len().saturating_sub(1);
    if degree == 0 {
        return Vec::new();
    }
    let lead = reduced[0];
    let mut companion = nalgebra::DMatrix::<f64>::zeros(degree, degree);
    for r in 1..degree {
        companion[(r, r - 1)] = 1.0;
    }
    for r in 0..degree {
        companion[(0, r)] = -reduced[r + 1] / lead;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .filter(|c| c.im.abs() < 1e-8 * (1.0 + c.re.abs()))
        .map(|c| c.re)
        .collect()
}

/// Control-free passive-safety check: propagate the mean ROE and covariance
/// over the horizon and require `separation - q sigma >= epsilon` at every
/// sample. The projected position uncertainty is scalarized conservatively
/// through the largest eigenvalue of the covariance projected onto the
/// configured plane.
#[allow(clippy::too_many_arguments)]
pub fn check_passive_safety(
    est: &RoeState,
    cov: &Matrix6<f64>,
    chief: &AbsoluteOrbit,
    forces: &ForceModelConfig,
    ballistic: Option<(&BallisticProperties, &BallisticProperties)>,
    config: &SafetyConfig,
    t_now: f64,
) -> Result<SafetyVerdict, DynamicsError> {
    let step = config.sample_step_s.min(60.0);
    let samples = (config.horizon_s / step).ceil() as usize;

    let mut roe = *est;
    let mut chief_now = *chief;
    chief_now.epoch = t_now;
    let mut p = *cov;
    let mut min_margin = f64::INFINITY;
    let mut tca = t_now;

    for k in 0..=samples {
        let t = t_now + (k as f64 * step).min(config.horizon_s);
        if k > 0 {
            let stm = stm_j2(&chief_now, chief_now.epoch, t);
            p = inflate_covariance(&p, &stm, &chief_now, forces.process_noise_per_orbit)?;
            let (next_roe, next_chief) =
                propagate_onboard_mean(&roe, &chief_now, forces, ballistic, t)?;
            roe = next_roe;
            chief_now = next_chief;
        }
        let u = chief_now.mean_arg_latitude();
        let margin = margin_at(&roe, &p, &chief_now, u, config);
        if margin < min_margin {
            min_margin = margin;
            tca = t;
        }
    }

    Ok(SafetyVerdict {
        safe: min_margin >= 0.0,
        min_margin,
        time_of_closest_approach: tca,
        plane: config.plane,
    })
}

fn margin_at(
    roe: &RoeState,
    p: &Matrix6<f64>,
    chief: &AbsoluteOrbit,
    u: f64,
    config: &SafetyConfig,
) -> f64 {
    let rtn = rtn_from_roe(chief, roe, u);

    // Jacobian of the in-plane position w.r.t. the ROE at this u.
    let mut jac = nalgebra::Matrix3x6::<f64>::zeros();
    for k in 0..6 {
        let mut e = nalgebra::Vector6::zeros();
        e[k] = 1.0;
        let col = rtn_from_roe(chief, &RoeState::from_vector(&e), u);
        jac[(0, k)] = col.r_r;
        jac[(1, k)] = col.r_t;
        jac[(2, k)] = col.r_n;
    }
    let pos_cov = jac * p * jac.transpose();

    let (sep, sigma_sq) = match config.plane {
        SafetyPlane::Rn => {
            let c2 = Matrix2::new(pos_cov[(0, 0)], pos_cov[(0, 2)], pos_cov[(2, 0)], pos_cov[(2, 2)]);
            (rtn.rn_separation(), max_eigenvalue_2x2(&c2))
        }
        SafetyPlane::ThreeD => {
            let sym = (pos_cov + pos_cov.transpose()) * 0.5;
            let eig = sym.symmetric_eigen();
            (rtn.separation(), eig.eigenvalues.max())
        }
    };
    sep - config.confidence_q * sigma_sq.max(0.0).sqrt() - config.min_separation
}

fn max_eigenvalue_2x2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 + disc
}

/// Outcome of one monitor step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorAction {
    Ok,
    EscalateEscape,
}

/// Stale-estimate policy for the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StalePolicy {
    Escalate,
    Hold,
}

/// Violation monitor with hysteresis: one escalation per violation episode,
/// re-armed only after a safe verdict.
#[derive(Debug, Clone)]
pub struct SafetyMonitor {
    armed: bool,
    pub stale_policy: StalePolicy,
    /// Maximum tolerated estimate age [s].
    pub max_estimate_age_s: f64,
}

impl Default for SafetyMonitor {
    fn default() -> Self {
        SafetyMonitor {
            armed: true,
            stale_policy: StalePolicy::Escalate,
            max_estimate_age_s: 60.0,
        }
    }
}

impl SafetyMonitor {
    pub fn step(&mut self, verdict: Option<&SafetyVerdict>, estimate_age_s: f64) -> MonitorAction {
        let violated = match verdict {
            Some(v) => !v.safe,
            None => false,
        };
        let stale = estimate_age_s > self.max_estimate_age_s;
        if stale && self.stale_policy == StalePolicy::Escalate {
            return self.escalate();
        }
        if violated {
            return self.escalate();
        }
        if verdict.map(|v| v.safe).unwrap_or(false) {
            self.armed = true;
        }
        MonitorAction::Ok
    }

    fn escalate(&mut self) -> MonitorAction {
        if self.armed {
            self.armed = false;
            MonitorAction::EscalateEscape
        } else {
            MonitorAction::Ok
        }
    }
}
