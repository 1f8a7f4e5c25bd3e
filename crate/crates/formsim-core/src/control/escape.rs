use nalgebra::{Matrix6, Vector3};

use super::{gamma, Maneuver, PlannerId};
use crate::astro::{AbsoluteOrbit, RoeState};
use crate::dynamics::mean_arg_lat_at;
use crate::safety::ei_separation_min_rn;
use crate::types::SpacecraftId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeConfig {
    /// Required closed-form minimum RN separation after the burn [m].
    pub min_rn_separation: f64,
    /// Nominal relative semi-major axis magnitude for the repulsive drift [m].
    pub nominal_da: f64,
    /// Sigma multiplier applied to the da estimate uncertainty.
    pub da_confidence: f64,
    /// Candidate search step along the next orbit [s].
    pub search_step_s: f64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        EscapeConfig {
            min_rn_separation: 5.0,
            nominal_da: 5.0,
            da_confidence: 3.0,
            search_step_s: 46.5,
        }
    }
}

/// Single-impulse escape: at the cheapest feasible time in the next orbit,
/// command the tangential component that drives |da| to the nominal drift
/// value padded by the estimated da uncertainty, plus the smallest normal
/// component that restores the closed-form e/i minimum RN separation.
///
/// Returns the maneuver and a flag that is true when no candidate satisfied
/// the RN condition and the best-effort maximizer was returned instead.
pub fn plan_escape(
    est: &RoeState,
    cov: &Matrix6<f64>,
    chief: &AbsoluteOrbit,
    config: &EscapeConfig,
    earliest_epoch: f64,
    actor: SpacecraftId,
) -> (Maneuver, bool) {
    let n = chief.mean_motion();
    let sigma_da = cov[(0, 0)].max(0.0).sqrt();
    // Drift away along the current da sign; exactly zero da drifts positive.
    let sign = if est.da >= 0.0 { 1.0 } else { -1.0 };
    let da_target = sign * (config.nominal_da + config.da_confidence * sigma_da);

    // Already safe and drifting: a no-op maneuver is permitted.
    if ei_separation_min_rn(est) >= config.min_rn_separation
        && est.da.abs() >= da_target.abs()
    {
        return (
            Maneuver::new(earliest_epoch, Vector3::zeros(), actor, PlannerId::Escape),
            false,
        );
    }

    let period = chief.period();
    let steps = (period / config.search_step_s).ceil() as usize;

    let mut best: Option<(f64, Maneuver)> = None;
    let mut best_effort: Option<(f64, Maneuver)> = None;

    for k in 0..steps {
        let t = earliest_epoch + k as f64 * config.search_step_s;
        let u = mean_arg_lat_at(chief, t);
        let dv_t = 0.5 * n * (da_target - est.da);

        let after_tangential = {
            let g = gamma(chief, u);
            let droe = g.apply(&Vector3::new(0.0, dv_t, 0.0));
            *est + droe
        };

        // Smallest |dv_n| meeting the RN condition, scanned then refined.
        let rn_of = |dv_n: f64| {
            let droe = gamma(chief, u).apply(&Vector3::new(0.0, 0.0, dv_n));
            ei_separation_min_rn(&(after_tangential + droe))
        };
        let dv_n_range = 4.0 * n * config.min_rn_separation;
        let mut feasible: Option<f64> = None;
        let mut best_margin = (rn_of(0.0), 0.0);
        let samples = 81;
        for j in 0..samples {
            let dv_n = dv_n_range * (j as f64 / (samples - 1) as f64 * 2.0 - 1.0);
            let rn = rn_of(dv_n);
            if rn > best_margin.0 {
                best_margin = (rn, dv_n);
            }
            if rn >= config.min_rn_separation {
                match feasible {
                    Some(existing) if dv_n.abs() >= existing.abs() => {}
                    _ => feasible = Some(dv_n),
                }
            }
        }

        if let Some(mut dv_n) = feasible {
            // Shrink toward zero while the condition holds.
            let mut lo = 0.0f64;
            let mut hi = dv_n;
            if rn_of(0.0) >= config.min_rn_separation {
                dv_n = 0.0;
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if rn_of(mid) >= config.min_rn_separation {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                dv_n = hi;
            }
            let m = Maneuver::new(t, Vector3::new(0.0, dv_t, dv_n), actor, PlannerId::Escape);
            let cost = m.dv_l1();
            if best.as_ref().map(|(c, _)| cost < *c).unwrap_or(true) {
                best = Some((cost, m));
            }
        } else {
            let m = Maneuver::new(
                t,
                Vector3::new(0.0, dv_t, best_margin.1),
                actor,
                PlannerId::Escape,
            );
            if best_effort
                .as_ref()
                .map(|(margin, _)| best_margin.0 > *margin)
                .unwrap_or(true)
            {
                best_effort = Some((best_margin.0, m));
            }
        }
    }

    match best {
        Some((_, m)) => (m, false),
        None => (best_effort.expect("search produced candidates").1, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::R_EARTH;
    use crate::control::buffer::net_roe_effect;

    fn table5_chief() -> AbsoluteOrbit {
        AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.004,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn already_safe_state_is_a_noop() {
        let chief = table5_chief();
        let est = RoeState::new(12.0, 0.0, 0.0, 200.0, 0.0, 200.0);
        let cov = Matrix6::from_diagonal(&nalgebra::Vector6::repeat(1e-4));
        let (m, flagged) = plan_escape(
            &est,
            &cov,
            &chief,
            &EscapeConfig::default(),
            100.0,
            SpacecraftId::Osc,
        );
        assert!(!flagged);
        assert_eq!(m.dv_rtn, Vector3::zeros());
    }

    #[test]
    fn commanded_da_produces_47m_per_orbit_drift() {
        // The escape target da of 5 m maps to a -3 pi * 5 m per-orbit
        // along-track drift under Kepler dynamics.
        let chief = table5_chief();
        let est = RoeState::new(0.0, 0.0, -34.51, 4.78, -18.72, 2.72);
        let cov = Matrix6::from_diagonal(&nalgebra::Vector6::repeat(1.44e-4));
        let (m, flagged) = plan_escape(
            &est,
            &cov,
            &chief,
            &EscapeConfig::default(),
            0.0,
            SpacecraftId::Osc,
        );
        assert!(!flagged);
        let droe = gamma(&chief, mean_arg_lat_at(&chief, m.epoch)).apply(&m.dv_rtn);
        let da_after = est.da + droe.da;
        let sigma = (1.44e-4f64).sqrt();
        assert!(
            (da_after - (5.0 + 3.0 * sigma)).abs() < 1e-9,
            "post-burn da {da_after}"
        );
        let drift_per_orbit = 3.0 * std::f64::consts::PI * da_after;
        assert!((drift_per_orbit - 47.1).abs() < 0.5, "drift {drift_per_orbit}");
        // Net linear effect sanity.
        let net = net_roe_effect(&[m], &chief, m.epoch);
        assert!((net[0] - droe.da).abs() < 1e-12);
    }

    #[test]
    fn post_escape_geometry_meets_rn_condition() {
        let chief = table5_chief();
        // Degenerate geometry: perpendicular e/i vectors of equal size pass
        // through the origin in the RN plane.
        let est = RoeState::new(0.0, 30.0, 50.0, 0.0, 0.0, 50.0);
        assert!(ei_separation_min_rn(&est) < 1.0);
        let cov = Matrix6::from_diagonal(&nalgebra::Vector6::repeat(1e-4));
        let (m, flagged) = plan_escape(
            &est,
            &cov,
            &chief,
            &EscapeConfig::default(),
            0.0,
            SpacecraftId::Osc,
        );
        assert!(!flagged, "geometry is fixable with a normal component");
        let droe = gamma(&chief, mean_arg_lat_at(&chief, m.epoch)).apply(&m.dv_rtn);
        let after = est + droe;
        assert!(
            ei_separation_min_rn(&after) >= 5.0 - 1e-6,
            "post-escape min RN {}",
            ei_separation_min_rn(&after)
        );
    }
}
