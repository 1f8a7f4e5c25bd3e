use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{Maneuver, ManeuverStatus};

/// Cold-gas propulsion performance envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorModel {
    /// Minimum realizable impulse [Ns].
    pub min_impulse_ns: f64,
    /// Maximum single impulse [Ns].
    pub max_impulse_ns: f64,
    /// Impulse quantization grid per axis [Ns].
    pub quantization_ns: f64,
    /// Magnitude error 1-sigma, fraction of the commanded magnitude.
    pub magnitude_error: f64,
    /// Direction error 1-sigma [rad].
    pub direction_error: f64,
    /// Plenum refill time between impulses [s].
    pub refill_time_s: f64,
    /// Specific impulse [s].
    pub isp_s: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        ActuatorModel {
            min_impulse_ns: 1.0e-3,
            max_impulse_ns: 2.2e-2,
            quantization_ns: 6.0e-5,
            magnitude_error: 0.05,
            direction_error: 1.0f64.to_radians(),
            refill_time_s: 46.5,
            isp_s: 44.0,
        }
    }
}

impl ActuatorModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_impulse_ns <= 0.0 || self.max_impulse_ns <= self.min_impulse_ns {
            return Err("impulse bounds out of order".into());
        }
        if self.quantization_ns <= 0.0 {
            return Err("quantization must be positive".into());
        }
        if !(0.0..=0.5).contains(&self.magnitude_error) {
            return Err("magnitude error out of the 5-50% envelope".into());
        }
        if !(0.0..=10.0f64.to_radians() + 1e-12).contains(&self.direction_error) {
            return Err("direction error out of the 0.05-10 degree envelope".into());
        }
        Ok(())
    }
}

/// Per-spacecraft actuator bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    pub last_execution: Option<f64>,
    /// Remaining propellant [kg].
    pub propellant_kg: f64,
    /// L1 delta-v executed so far, thruster frame [m/s].
    pub dv_spent: f64,
}

impl ActuatorState {
    pub fn new(propellant_kg: f64) -> Self {
        ActuatorState {
            last_execution: None,
            propellant_kg,
            dv_spent: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionOutcome {
    /// The maneuver executed; the realized delta-v is in `executed_dv`.
    Executed(Maneuver),
    /// The plenum has not refilled; the scheduler holds the maneuver.
    Deferred,
    /// Out of propellant.
    TankEmpty,
}

const G0: f64 = 9.80665;

/// Execute a committed maneuver through the actuator model: scale by the
/// magnitude error, rotate by a small-angle direction error, quantize each
/// thruster-frame axis to the impulse grid, decrement propellant through the
/// specific impulse, and enforce the plenum refill spacing.
pub fn execute_maneuver(
    m: &Maneuver,
    model: &ActuatorModel,
    state: &mut ActuatorState,
    mass_kg: f64,
    rng: &mut impl Rng,
) -> ExecutionOutcome {
    if let Some(last) = state.last_execution {
        if m.epoch - last < model.refill_time_s - 1e-9 {
            return ExecutionOutcome::Deferred;
        }
    }
    if state.propellant_kg <= 0.0 {
        return ExecutionOutcome::TankEmpty;
    }

    let commanded = m.dv_rtn;
    let mut realized = commanded;
    if commanded.norm() > 0.0 {
        // Magnitude error.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let scale = 1.0 + model.magnitude_error * normal.sample(rng);
        realized *= scale;
        // Small-angle cone rotation about a uniformly random perpendicular.
        let angle = model.direction_error * normal.sample(rng);
        let azimuth = rng.gen::<f64>() * std::f64::consts::TAU;
        let axis_seed = if realized.x.abs() < 0.9 * realized.norm() {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let perp1 = realized.cross(&axis_seed).normalize();
        let perp2 = realized.cross(&perp1).normalize();
        let axis = perp1 * azimuth.cos() + perp2 * azimuth.sin();
        realized = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(axis),
            angle,
        ) * realized;
    }

    // Per-axis quantization of the impulse (thruster frame = RTN).
    let quant_dv = model.quantization_ns / mass_kg;
    let mut quantized = realized.map(|v| (v / quant_dv).round() * quant_dv);
    // Impulses below the minimum bit cannot be realized.
    if quantized.norm() * mass_kg < model.min_impulse_ns {
        quantized = Vector3::zeros();
    }

    let impulse_l1: f64 = quantized.iter().map(|v| v.abs() * mass_kg).sum();
    let propellant = impulse_l1 / (model.isp_s * G0);
    if propellant > state.propellant_kg {
        return ExecutionOutcome::TankEmpty;
    }
    state.propellant_kg -= propellant;
    state.dv_spent += quantized.iter().map(|v| v.abs()).sum::<f64>();
    if quantized.norm() > 0.0 {
        state.last_execution = Some(m.epoch);
    }

    let mut out = *m;
    out.status = ManeuverStatus::Executed;
    out.executed_dv = Some(quantized);
    ExecutionOutcome::Executed(out)
}
