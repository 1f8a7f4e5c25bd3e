use nalgebra::Vector2;

use super::{ControlError, ControlTarget, TargetKind};
use crate::astro::{wrap_to_pi, AbsoluteOrbit, RoeState};
use crate::safety::ei_separation_min_rn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConfig {
    /// Fractional shrink (or growth) of the e/i scale per 1.5-orbit step.
    pub step_ratio: f64,
    /// Required closed-form minimum RN separation at every waypoint [m].
    pub min_rn_separation: f64,
    /// Allowed |angle(de, di)| deviation from 0 or pi [rad].
    pub alignment_band: f64,
    /// Cap on |da| as a fraction of the current RN separation scale.
    pub da_fraction: f64,
    /// Duration of one reconfiguration step [orbits].
    pub step_orbits: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            step_ratio: 0.8,
            min_rn_separation: 5.0,
            alignment_band: 0.35,
            da_fraction: 0.2,
            step_orbits: 1.5,
        }
    }
}

fn vec2(x: f64, y: f64) -> Vector2<f64> {
    Vector2::new(x, y)
}

/// Angle between the relative eccentricity and inclination vectors, folded
/// to [0, pi/2] distance from the parallel/anti-parallel axis.
fn alignment_angle(roe: &RoeState) -> f64 {
    let de = vec2(roe.dex, roe.dey);
    let di = vec2(roe.dix, roe.diy);
    if de.norm() < 1e-9 || di.norm() < 1e-9 {
        return 0.0;
    }
    let cos = (de.dot(&di) / (de.norm() * di.norm())).clamp(-1.0, 1.0);
    cos.abs().acos()
}

/// Passively safe transfer guidance: a sequence of 1.5-orbit waypoints whose
/// e/i magnitudes interpolate geometrically (per-step cost proportional to
/// the shrinking RN separation), whose e/i vectors rotate synchronously so
/// the alignment angle stays inside the configured band, and whose da stays
/// a small fraction of the current separation scale. Every intermediate
/// waypoint passes the closed-form minimum-RN screen.
pub fn transfer_guidance(
    from: &RoeState,
    to: &RoeState,
    chief: &AbsoluteOrbit,
    config: &TransferConfig,
    t_start: f64,
) -> Result<Vec<ControlTarget>, ControlError> {
    let d_from = *from - *to;
    if d_from.to_vector().norm() < 1e-9 {
        return Ok(Vec::new());
    }

    // Pathological endpoints: parallel at one end, anti-parallel at the
    // other, forcing the vectors through a perpendicular crossing.
    let de_f = vec2(from.dex, from.dey);
    let di_f = vec2(from.dix, from.diy);
    let de_t = vec2(to.dex, to.dey);
    let di_t = vec2(to.dix, to.diy);
    if de_f.norm() > 1e-9 && di_f.norm() > 1e-9 && de_t.norm() > 1e-9 && di_t.norm() > 1e-9 {
        let dot_from = de_f.dot(&di_f).signum();
        let dot_to = de_t.dot(&di_t).signum();
        if dot_from * dot_to < 0.0 {
            return Err(ControlError::PathologicalTransfer);
        }
    }

    // Geometric interpolation of the e/i scale; step count from the ratio.
    let scale_from = de_f.norm().max(di_f.norm()).max(1.0);
    let scale_to = de_t.norm().max(di_t.norm()).max(1.0);
    let ratio = scale_from / scale_to;
    let steps = (ratio.ln().abs() / config.step_ratio.recip().ln().abs())
        .ceil()
        .max(1.0) as usize;

    let angle_between = |a: Vector2<f64>, b: Vector2<f64>| -> f64 {
        if a.norm() < 1e-9 || b.norm() < 1e-9 {
            0.0
        } else {
            wrap_to_pi(b.y.atan2(b.x) - a.y.atan2(a.x))
        }
    };
    let de_rot = angle_between(de_f, de_t);
    let di_rot = angle_between(di_f, di_t);

    let period = chief.period();
    let mut waypoints = Vec::with_capacity(steps);
    for k in 1..=steps {
        let s = k as f64 / steps as f64;
        // Log-scale magnitude, linear phase.
        let lerp_mag = |m0: f64, m1: f64| -> f64 {
            if m0 < 1e-9 || m1 < 1e-9 {
                m0 + (m1 - m0) * s
            } else {
                (m0.ln() + (m1.ln() - m0.ln()) * s).exp()
            }
        };
        let rot = |v: Vector2<f64>, ang: f64, m0: f64, m1: f64| -> Vector2<f64> {
            if v.norm() < 1e-9 {
                return v + (vec2(0.0, 0.0) - v) * s;
            }
            let mag = lerp_mag(m0, m1);
            let phase = v.y.atan2(v.x) + ang * s;
            vec2(mag * phase.cos(), mag * phase.sin())
        };
        let de_k = if de_t.norm() > 1e-9 && de_f.norm() > 1e-9 {
            rot(de_f, de_rot, de_f.norm(), de_t.norm())
        } else {
            de_f + (de_t - de_f) * s
        };
        let di_k = if di_t.norm() > 1e-9 && di_f.norm() > 1e-9 {
            rot(di_f, di_rot, di_f.norm(), di_t.norm())
        } else {
            di_f + (di_t - di_f) * s
        };

        let scale_k = de_k.norm().max(di_k.norm());
        let da_raw = from.da + (to.da - from.da) * s;
        let da_k = da_raw.clamp(-config.da_fraction * scale_k, config.da_fraction * scale_k);
        let dl_k = from.dlambda + (to.dlambda - from.dlambda) * s;

        let roe_k = RoeState::new(da_k, dl_k, de_k.x, de_k.y, di_k.x, di_k.y);

        // Waypoint screening.
        if ei_separation_min_rn(&roe_k) < config.min_rn_separation {
            return Err(ControlError::PathologicalTransfer);
        }
        if alignment_angle(&roe_k) > config.alignment_band {
            return Err(ControlError::PathologicalTransfer);
        }

        waypoints.push(ControlTarget::new(
            roe_k,
            t_start + k as f64 * config.step_orbits * period,
            TargetKind::Waypoint,
        ));
    }
    // Land exactly on the requested end state.
    if let Some(last) = waypoints.last_mut() {
        last.roe = *to;
    }
    Ok(waypoints)
}
