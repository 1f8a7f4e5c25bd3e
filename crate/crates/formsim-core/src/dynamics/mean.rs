use super::forces::{density_at, BallisticProperties, DragModel, ForceModelConfig, Geopotential};
use super::DynamicsError;
use crate::astro::{absolute_from_roe, roe_from_absolute, AbsoluteOrbit, RoeState};
use crate::consts::{GM_EARTH, J2_EARTH, R_EARTH};

const MEAN_STEP: f64 = 30.0;

/// J2 secular rates of the mean elements: (da/dt, draan/dt, dargp/dt, dM/dt).
fn element_rates(
    el: &AbsoluteOrbit,
    forces: &ForceModelConfig,
    ballistic: Option<&BallisticProperties>,
) -> (f64, f64, f64, f64) {
    let n = el.mean_motion();
    let eta2 = 1.0 - el.e * el.e;
    let p = el.a * eta2;
    let (draan, dargp, dm_j2) = match forces.geopotential {
        Geopotential::Kepler => (0.0, 0.0, 0.0),
        Geopotential::J2 => {
            let kappa = 0.75 * J2_EARTH * n * (R_EARTH / p).powi(2);
            let c = el.i.cos();
            (
                -2.0 * kappa * c,
                kappa * (5.0 * c * c - 1.0),
                kappa * eta2.sqrt() * (3.0 * c * c - 1.0),
            )
        }
    };
    let da = match (&forces.drag, ballistic) {
        (DragModel::Off, _) | (_, None) => 0.0,
        (drag, Some(ball)) => {
            // Circular-orbit energy decay: da/dt = -rho * (Cd A / m) * sqrt(mu a).
            let rho = density_at(drag, el.a);
            -rho * ball.drag_beta(ball.area) * (GM_EARTH * el.a).sqrt()
        }
    };
    (da, draan, dargp, n + dm_j2)
}

/// Propagate one spacecraft's mean elements from their epoch to `t1` with
/// J2 secular rates and the mean drag decay, RK4 at steps of at most 30 s.
pub fn propagate_mean_elements(
    orbit: &AbsoluteOrbit,
    forces: &ForceModelConfig,
    ballistic: Option<&BallisticProperties>,
    t1: f64,
) -> Result<AbsoluteOrbit, DynamicsError> {
    let mut el = *orbit;
    // State propagated without angle wrapping so long arcs stay smooth.
    let (mut a, mut raan, mut argp, mut m) = (el.a, el.raan, el.argp, el.mean_anomaly);
    let mut t = el.epoch;
    let forward = t1 >= t;
    while (forward && t < t1 - 1e-9) || (!forward && t > t1 + 1e-9) {
        let h = if forward {
            (t1 - t).min(MEAN_STEP)
        } else {
            (t1 - t).max(-MEAN_STEP)
        };
        let eval = |a: f64, raan: f64, argp: f64, m: f64| {
            let probe = AbsoluteOrbit {
                a,
                e: el.e,
                i: el.i,
                raan,
                argp,
                mean_anomaly: m,
                epoch: 0.0,
            };
            element_rates(&probe, forces, ballistic)
        };
        let k1 = eval(a, raan, argp, m);
        let k2 = eval(
            a + 0.5 * h * k1.0,
            raan + 0.5 * h * k1.1,
            argp + 0.5 * h * k1.2,
            m + 0.5 * h * k1.3,
        );
        let k3 = eval(
            a + 0.5 * h * k2.0,
            raan + 0.5 * h * k2.1,
            argp + 0.5 * h * k2.2,
            m + 0.5 * h * k2.3,
        );
        let k4 = eval(a + h * k3.0, raan + h * k3.1, argp + h * k3.2, m + h * k3.3);
        a += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        raan += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        argp += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        m += h / 6.0 * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3);
        t += h;
    }
    el.a = a;
    el.raan = crate::astro::wrap_to_2pi(raan);
    el.argp = crate::astro::wrap_to_2pi(argp);
    el.mean_anomaly = crate::astro::wrap_to_2pi(m);
    el.epoch = t1;
    if !el.a.is_finite() {
        return Err(DynamicsError::NonFiniteState(t1));
    }
    Ok(el)
}

/// Secular rate of the mean argument of latitude (Kepler plus J2).
pub fn mean_arg_lat_rate(chief: &AbsoluteOrbit) -> f64 {
    let n = chief.mean_motion();
    let eta2 = 1.0 - chief.e * chief.e;
    let p = chief.a * eta2;
    let kappa = 0.75 * J2_EARTH * n * (R_EARTH / p).powi(2);
    let c = chief.i.cos();
    n + kappa * (eta2.sqrt() * (3.0 * c * c - 1.0) + (5.0 * c * c - 1.0))
}

/// Mean argument of latitude of the chief at mission time `t`, assuming
/// J2-secular evolution from the chief's epoch.
pub fn mean_arg_lat_at(chief: &AbsoluteOrbit, t: f64) -> f64 {
    chief.mean_arg_latitude() + mean_arg_lat_rate(chief) * (t - chief.epoch)
}

/// On-board mean relative motion: both spacecraft propagated in mean element
/// space and re-differenced. Returns the ROE at `t1` together with the
/// propagated chief.
///
/// `ballistic` carries (chief, deputy) properties for the differential-drag
/// decay of the relative semi-major axis; pass `None` to ignore drag.
pub fn propagate_onboard_mean(
    roe: &RoeState,
    chief: &AbsoluteOrbit,
    forces: &ForceModelConfig,
    ballistic: Option<(&BallisticProperties, &BallisticProperties)>,
    t1: f64,
) -> Result<(RoeState, AbsoluteOrbit), DynamicsError> {
    let deputy = absolute_from_roe(chief, roe)?;
    let chief1 = propagate_mean_elements(chief, forces, ballistic.map(|b| b.0), t1)?;
    let deputy1 = propagate_mean_elements(&deputy, forces, ballistic.map(|b| b.1), t1)?;
    let roe1 = roe_from_absolute(&chief1, &deputy1)?;
    Ok((roe1, chief1))
}
