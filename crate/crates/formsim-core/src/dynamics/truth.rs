use nalgebra::Vector3;

use super::forces::{acceleration, BallisticProperties, ForceModelConfig};
use super::DynamicsError;
use crate::astro::{rtn_basis, EciState};
use crate::types::SpacecraftId;

/// One instantaneous velocity increment, expressed in the RTN frame of the
/// spacecraft that executes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulsiveBurn {
    pub epoch: f64,
    pub dv_rtn: Vector3<f64>,
    pub actor: SpacecraftId,
}

/// Ground-truth Cartesian state of the two-spacecraft formation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthState {
    pub epoch: f64,
    pub dsc: EciState,
    pub osc: EciState,
}

impl TruthState {
    pub fn state_of(&self, id: SpacecraftId) -> &EciState {
        match id {
            SpacecraftId::Dsc => &self.dsc,
            SpacecraftId::Osc => &self.osc,
        }
    }
}

const MIN_STEP: f64 = 1.0;
const MAX_STEP: f64 = 10.0;
/// Per-step position tolerance for the step-doubling error control [m].
const STEP_TOLERANCE: f64 = 1e-6;

/// RK4 step-doubling propagation of both spacecraft from `state.epoch` to
/// `t1`, applying the listed burns at their epochs as instantaneous RTN
/// velocity increments.
///
/// Burns must be sorted by epoch; burns outside [t0, t1) are ignored. The
/// step size adapts inside [1, 10] s; an interval needing a smaller step is
/// a propagation failure.
pub fn propagate_truth(
    state: &TruthState,
    ballistic: &[BallisticProperties; 2],
    forces: &ForceModelConfig,
    burns: &[ImpulsiveBurn],
    t1: f64,
    area_fn: Option<&dyn Fn(f64, SpacecraftId) -> f64>,
) -> Result<TruthState, DynamicsError> {
    let mut current = *state;
    debug_assert!(burns.windows(2).all(|w| w[0].epoch <= w[1].epoch));

    for burn in burns {
        if burn.epoch < current.epoch || burn.epoch >= t1 {
            continue;
        }
        current = coast(&current, ballistic, forces, burn.epoch, area_fn)?;
        current = apply_burn(&current, burn);
    }
    coast(&current, ballistic, forces, t1, area_fn)
}

fn apply_burn(state: &TruthState, burn: &ImpulsiveBurn) -> TruthState {
    let mut next = *state;
    let target = match burn.actor {
        SpacecraftId::Dsc => &mut next.dsc,
        SpacecraftId::Osc => &mut next.osc,
    };
    // Rows of the basis are R/T/N; transpose maps RTN components to ECI.
    let basis = rtn_basis(target);
    target.v += basis.transpose() * burn.dv_rtn;
    next
}

fn coast(
    state: &TruthState,
    ballistic: &[BallisticProperties; 2],
    forces: &ForceModelConfig,
    t1: f64,
    area_fn: Option<&dyn Fn(f64, SpacecraftId) -> f64>,
) -> Result<TruthState, DynamicsError> {
    let mut current = *state;
    while current.epoch < t1 - 1e-9 {
        let remaining = t1 - current.epoch;
        let mut h = remaining.min(MAX_STEP);
        loop {
            let full = rk4_pair(&current, ballistic, forces, h, area_fn);
            let half = {
                let mid = rk4_pair(&current, ballistic, forces, h / 2.0, area_fn);
                rk4_pair(&mid, ballistic, forces, h / 2.0, area_fn)
            };
            let err = (full.dsc.r - half.dsc.r)
                .norm()
                .max((full.osc.r - half.osc.r).norm());
            if err <= STEP_TOLERANCE || h <= remaining.min(MIN_STEP) + 1e-12 {
                if !half.dsc.r.iter().chain(half.osc.r.iter()).all(|x| x.is_finite()) {
                    return Err(DynamicsError::NonFiniteState(current.epoch));
                }
                if err > STEP_TOLERANCE && h <= MIN_STEP + 1e-12 && remaining > MIN_STEP {
                    return Err(DynamicsError::StepSizeUnderflow(current.epoch));
                }
                current = half;
                break;
            }
            h /= 2.0;
        }
    }
    current.epoch = t1;
    Ok(current)
}

fn rk4_pair(
    state: &TruthState,
    ballistic: &[BallisticProperties; 2],
    forces: &ForceModelConfig,
    h: f64,
    area_fn: Option<&dyn Fn(f64, SpacecraftId) -> f64>,
) -> TruthState {
    let area = |t: f64, id: SpacecraftId| -> f64 {
        match area_fn {
            Some(f) => f(t, id),
            None => ballistic[id.index()].area,
        }
    };
    let dsc = rk4_single(
        &state.dsc,
        state.epoch,
        h,
        &ballistic[0],
        forces,
        &|t| area(t, SpacecraftId::Dsc),
    );
    let osc = rk4_single(
        &state.osc,
        state.epoch,
        h,
        &ballistic[1],
        forces,
        &|t| area(t, SpacecraftId::Osc),
    );
    TruthState {
        epoch: state.epoch + h,
        dsc,
        osc,
    }
}

fn rk4_single(
    s: &EciState,
    t: f64,
    h: f64,
    ballistic: &BallisticProperties,
    forces: &ForceModelConfig,
    area: &dyn Fn(f64) -> f64,
) -> EciState {
    let f = |t: f64, r: &Vector3<f64>, v: &Vector3<f64>| -> (Vector3<f64>, Vector3<f64>) {
        (*v, acceleration(r, v, t, forces, ballistic, area(t)))
    };
    let (k1r, k1v) = f(t, &s.r, &s.v);
    let (k2r, k2v) = f(
        t + h / 2.0,
        &(s.r + k1r * (h / 2.0)),
        &(s.v + k1v * (h / 2.0)),
    );
    let (k3r, k3v) = f(
        t + h / 2.0,
        &(s.r + k2r * (h / 2.0)),
        &(s.v + k2v * (h / 2.0)),
    );
    let (k4r, k4v) = f(t + h, &(s.r + k3r * h), &(s.v + k3v * h));
    EciState {
        r: s.r + (k1r + 2.0 * k2r + 2.0 * k3r + k4r) * (h / 6.0),
        v: s.v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0),
    }
}

/// Specific orbital energy [J/kg], for conservation checks.
#[allow(dead_code)]
pub fn specific_energy(state: &EciState) -> f64 {
    0.5 * state.v.norm_squared() - crate::consts::GM_EARTH / state.r.norm()
}
