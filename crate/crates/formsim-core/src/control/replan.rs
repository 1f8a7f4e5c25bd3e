use nalgebra::Matrix6;

use super::{gamma, ControlTarget, Maneuver};
use crate::astro::{AbsoluteOrbit, RoeState};
use crate::dynamics::{inflate_covariance, mean_arg_lat_at, stm_j2};

/// 68% quantile of the chi-square distribution with 6 degrees of freedom,
/// the default replan threshold on the squared Mahalanobis miss.
pub const REPLAN_CHI2_6DOF_68PCT: f64 = 7.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanDecision {
    Keep,
    Replan,
}

/// Stochastic-MPC replan test: propagate the estimate and the committed plan
/// open-loop to the target epoch and keep the plan while the Mahalanobis
/// distance of the predicted miss stays below the threshold.
pub fn mpc_replan_decision(
    plan: &[Maneuver],
    est: &RoeState,
    cov: &Matrix6<f64>,
    target: &ControlTarget,
    chief: &AbsoluteOrbit,
    t_now: f64,
    process_noise_per_orbit: f64,
) -> ReplanDecision {
    let tf = target.achieve_by;
    let coast = stm_j2(chief, t_now, tf);
    let mut predicted = coast.apply(est).to_vector();
    for m in plan {
        if m.epoch < t_now || m.epoch > tf {
            continue;
        }
        predicted += stm_j2(chief, m.epoch, tf).matrix
            * gamma(chief, mean_arg_lat_at(chief, m.epoch)).matrix
            * m.dv_rtn;
    }
    let miss = target.roe.to_vector() - predicted;

    let p_f = inflate_covariance(cov, &coast, chief, process_noise_per_orbit)
        .unwrap_or_else(|_| coast.matrix * cov * coast.matrix.transpose());
    let d2 = match p_f.cholesky() {
        Some(chol) => miss.dot(&chol.solve(&miss)),
        // Degenerate covariance: fall back to a tight position test.
        None => {
            if miss.norm() < 1e-3 {
                0.0
            } else {
                f64::INFINITY
            }
        }
    };
    if d2 <= target.tolerance {
        ReplanDecision::Keep
    } else {
        ReplanDecision::Replan
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::R_EARTH;
    use crate::control::TargetKind;
    use nalgebra::Vector6;

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
    fn zero_miss_keeps_the_plan() {
        let chief = table5_chief();
        let est = RoeState::new(0.0, 10.0, 5.0, -5.0, 3.0, 1.0);
        let tf = 0.5 * chief.period();
        let target = ControlTarget::new(
            stm_j2(&chief, 0.0, tf).apply(&est),
            tf,
            TargetKind::ScienceAlignment,
        );
        let cov = Matrix6::from_diagonal(&Vector6::repeat(1e-4));
        let d = mpc_replan_decision(&[], &est, &cov, &target, &chief, 0.0, 0.0);
        assert_eq!(d, ReplanDecision::Keep);
    }

    #[test]
    fn large_miss_replans() {
        let chief = table5_chief();
        let est = RoeState::ZERO;
        let tf = 0.5 * chief.period();
        let mut goal = stm_j2(&chief, 0.0, tf).apply(&est);
        goal.dex += 5.0; // far outside the 1 cm covariance
        let target = ControlTarget::new(goal, tf, TargetKind::ScienceAlignment);
        let cov = Matrix6::from_diagonal(&Vector6::repeat(1e-4));
        let d = mpc_replan_decision(&[], &est, &cov, &target, &chief, 0.0, 0.0);
        assert_eq!(d, ReplanDecision::Replan);
    }

    #[test]
    fn committed_plan_counts_toward_the_prediction() {
        let chief = table5_chief();
        let est = RoeState::ZERO;
        let tf = 0.5 * chief.period();
        let t_burn = 600.0;
        let dv = nalgebra::Vector3::new(0.0, 1.0e-3, 0.0);
        let predicted = stm_j2(&chief, t_burn, tf).matrix
            * gamma(&chief, mean_arg_lat_at(&chief, t_burn)).matrix
            * dv;
        let target = ControlTarget::new(
            RoeState::from_vector(&predicted),
            tf,
            TargetKind::ScienceAlignment,
        );
        let plan = [Maneuver::new(
            t_burn,
            dv,
            crate::types::SpacecraftId::Osc,
            crate::control::PlannerId::ReachableSet,
        )];
        let cov = Matrix6::from_diagonal(&Vector6::repeat(1e-4));
        assert_eq!(
            mpc_replan_decision(&plan, &est, &cov, &target, &chief, 0.0, 0.0),
            ReplanDecision::Keep
        );
        assert_eq!(
            mpc_replan_decision(&[], &est, &cov, &target, &chief, 0.0, 0.0),
            ReplanDecision::Replan
        );
    }
}
