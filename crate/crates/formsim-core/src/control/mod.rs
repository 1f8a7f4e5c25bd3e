//! Impulsive maneuver planning: the closed-form planner for long horizons,
//! the reachable-set SOCP/QP planner for sub-orbit horizons, the
//! Tikhonov-regularized fixed-time planner for terminal corrections, the
//! single-impulse escape planner, maneuver buffering against actuator
//! constraints, passively safe transfer guidance, and the MPC replan test.

mod buffer;
mod closed_form;
mod escape;
mod gamma;
mod reachable;
mod replan;
mod tikhonov;
mod transfer;

pub use buffer::{buffer_maneuver, net_roe_effect};
pub use closed_form::plan_closed_form;
pub use escape::{plan_escape, EscapeConfig};
pub use gamma::{gamma, GammaMatrix};
pub use reachable::{plan_fuel_l2, plan_reachable_set_mpc};
pub use replan::{mpc_replan_decision, ReplanDecision, REPLAN_CHI2_6DOF_68PCT};
pub use tikhonov::plan_tikhonov;
pub use transfer::{transfer_guidance, TransferConfig};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::RoeState;
use crate::dynamics::ImpulsiveBurn;
use crate::types::SpacecraftId;

/// Minimum separation between committed impulses of one actor [s].
pub const MANEUVER_SPACING_S: f64 = 46.5;

/// Largest single impulse the actuator can realize [m/s].
pub const MAX_IMPULSE_DV: f64 = 2.0e-3;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("horizon of {0:.2} orbits is below the {1:.2}-orbit minimum for this planner")]
    HorizonTooShort(f64, f64),
    #[error("horizon of {0:.2} orbits is outside the sub-orbit planner domain")]
    HorizonOutOfDomain(f64),
    #[error("normal matrix is singular; a positive regularization is required")]
    SingularNormalMatrix,
    #[error("maneuver buffering needs a positive impulse bound")]
    NonPositiveImpulseBound,
    #[error("convex solver failed: {0}")]
    SolverFailure(String),
    #[error("transfer endpoints are pathological: de/di alignment flips between endpoints")]
    PathologicalTransfer,
    #[error(transparent)]
    Astro(#[from] crate::astro::AstroError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverStatus {
    Planned,
    Buffered,
    Committed,
    Executed,
}

/// Which planner produced a maneuver (for the maneuver log).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerId {
    ClosedForm,
    ReachableSet,
    Tikhonov,
    Escape,
    Ground,
}

/// One planned RTN velocity impulse with its execution metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub epoch: f64,
    pub dv_rtn: Vector3<f64>,
    pub actor: SpacecraftId,
    pub status: ManeuverStatus,
    pub planner: PlannerId,
    /// Realized impulse after actuation errors, set when executed.
    pub executed_dv: Option<Vector3<f64>>,
}

impl Maneuver {
    pub fn new(epoch: f64, dv_rtn: Vector3<f64>, actor: SpacecraftId, planner: PlannerId) -> Self {
        Self {
            epoch,
            dv_rtn,
            actor,
            status: ManeuverStatus::Planned,
            planner,
            executed_dv: None,
        }
    }

    pub fn as_burn(&self) -> ImpulsiveBurn {
        ImpulsiveBurn {
            epoch: self.epoch,
            dv_rtn: self.executed_dv.unwrap_or(self.dv_rtn),
            actor: self.actor,
        }
    }

    /// L1 norm of the commanded RTN components [m/s].
    pub fn dv_l1(&self) -> f64 {
        self.dv_rtn.iter().map(|x| x.abs()).sum()
    }

    pub fn dv_l2(&self) -> f64 {
        self.dv_rtn.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Stationkeeping,
    Waypoint,
    ScienceAlignment,
    Escape,
}

/// Guidance target for the planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlTarget {
    pub roe: RoeState,
    /// Epoch by which the target ROE must hold [s].
    pub achieve_by: f64,
    /// Mahalanobis miss threshold for the replan decision.
    pub tolerance: f64,
    pub kind: TargetKind,
}

impl ControlTarget {
    pub fn new(roe: RoeState, achieve_by: f64, kind: TargetKind) -> Self {
        Self {
            roe,
            achieve_by,
            tolerance: REPLAN_CHI2_6DOF_68PCT,
            kind,
        }
    }
}
