use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::state::{Blocks, NavState, STATE_DIM};
use super::NavError;
use crate::astro::{rtn_basis, EciState};
use crate::consts::GPS_L1_WAVELENGTH;
use crate::dynamics::forces::acceleration;
use crate::dynamics::ImpulsiveBurn;
use crate::gnss::{GnssConstellation, RawMeasurement};
use crate::types::SpacecraftId;

/// Outcome counters of one measurement-update call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of normalized innovation squares of accepted updates.
    pub nis_sum: f64,
}

/// Mean and covariance propagation to `t1`.
///
/// Means follow the on-board force model plus the empirical accelerations
/// (applied as RTN forces); maneuvers known to this spacecraft are applied
/// as velocity increments at their execution epochs. The covariance uses a
/// numerically differenced state transition over the (r, v, alpha) blocks,
/// a Gauss-Markov decay on the accelerations, and random-walk clocks.
/// Ambiguities and antenna offsets stay constant.
pub fn time_update(
    nav: &mut NavState,
    t1: f64,
    known_burns: &[ImpulsiveBurn],
) -> Result<(), NavError> {
    const MAX_STEP: f64 = 60.0;
    while nav.epoch < t1 - 1e-9 {
        let step_end = (nav.epoch + MAX_STEP).min(t1);
        // Split at burn epochs inside the interval.
        let mut next = step_end;
        for b in known_burns {
            if b.epoch > nav.epoch + 1e-9 && b.epoch < next - 1e-9 {
                next = b.epoch;
            }
        }
        propagate_step(nav, next)?;
        for b in known_burns {
            if (b.epoch - nav.epoch).abs() < 1e-9 {
                apply_burn(nav, b);
            }
        }
    }
    Ok(())
}

fn apply_burn(nav: &mut NavState, burn: &ImpulsiveBurn) {
    let state = nav.eci_state(burn.actor);
    let dv_eci = rtn_basis(&state).transpose() * burn.dv_rtn;
    let v = Blocks::vel(burn.actor);
    for k in 0..3 {
        nav.x[v + k] += dv_eci[k];
    }
}

fn propagate_step(nav: &mut NavState, t1: f64) -> Result<(), NavError> {
    let dt = t1 - nav.epoch;
    let t0 = nav.epoch;
    let phi_gm = (-dt / nav.config.dmc_tau).exp();

    // Nominal propagation and Jacobian by forward differencing over the
    // (r, v, alpha) block of each spacecraft.
    let mut f_block = [DMatrix::<f64>::identity(9, 9), DMatrix::<f64>::identity(9, 9)];
    let mut new_rv = [Vector3::zeros(); 4]; // r_dsc, v_dsc, r_osc, v_osc

    for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
        let idx = sc.index();
        let r0 = nav.position(sc);
        let v0 = nav.velocity(sc);
        let a0 = nav.empirical_accel(sc);
        let ball = nav.ballistic[idx];
        let forces = nav.forces;

        let flow = |r: Vector3<f64>, v: Vector3<f64>, alpha: Vector3<f64>| -> (Vector3<f64>, Vector3<f64>) {
            rk4_with_alpha(&r, &v, &alpha, t0, dt, &forces, &ball)
        };

        let (r1, v1) = flow(r0, v0, a0);
        new_rv[2 * idx] = r1;
        new_rv[2 * idx + 1] = v1;

        // Finite-difference scales per component kind.
        let eps_r = 1e-1;
        let eps_v = 1e-4;
        let eps_a = 1e-9;
        for col in 0..9 {
            let (mut rp, mut vp, mut ap) = (r0, v0, a0);
            let eps = match col {
                0..=2 => {
                    rp[col] += eps_r;
                    eps_r
                }
                3..=5 => {
                    vp[col - 3] += eps_v;
                    eps_v
                }
                _ => {
                    ap[col - 6] += eps_a;
                    eps_a
                }
            };
            let (rq, vq) = flow(rp, vp, ap);
            for row in 0..3 {
                f_block[idx][(row, col)] = (rq[row] - r1[row]) / eps;
                f_block[idx][(row + 3, col)] = (vq[row] - v1[row]) / eps;
            }
        }
        // Gauss-Markov rows.
        for row in 6..9 {
            for col in 0..9 {
                f_block[idx][(row, col)] = if row == col { phi_gm } else { 0.0 };
            }
        }
    }

    // Covariance: P <- F P F' + Q with F identity outside the two 9-blocks
    // (after the GM decay) and the clock/antenna rows.
    let mut f_active = DMatrix::<f64>::identity(26, 26);
    for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
        let idx = sc.index();
        let base = 13 * idx;
        for r in 0..9 {
            for c in 0..9 {
                f_active[(base + r, base + c)] = f_block[idx][(r, c)];
            }
        }
    }
    let p_aa = nav.cov.view((0, 0), (26, 26)).into_owned();
    let p_ab = nav.cov.view((0, 26), (26, STATE_DIM - 26)).into_owned();
    let new_aa = &f_active * p_aa * f_active.transpose();
    let new_ab = &f_active * p_ab;
    nav.cov.view_mut((0, 0), (26, 26)).copy_from(&new_aa);
    nav.cov
        .view_mut((0, 26), (26, STATE_DIM - 26))
        .copy_from(&new_ab);
    nav.cov
        .view_mut((26, 0), (STATE_DIM - 26, 26))
        .copy_from(&new_ab.transpose());

    // Process noise.
    for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
        for k in 0..3 {
            let sig = nav.config.dmc_sigma_rtn[k];
            let q_gm = sig * sig * (1.0 - phi_gm * phi_gm);
            let ai = Blocks::acc(sc) + k;
            nav.cov[(ai, ai)] += q_gm;
            let vi = Blocks::vel(sc) + k;
            nav.cov[(vi, vi)] += nav.config.velocity_noise_floor * dt;
        }
        let ci = Blocks::clock(sc);
        nav.cov[(ci, ci)] += nav.config.clock_walk * nav.config.clock_walk * dt;
    }

    // Commit means.
    for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
        let idx = sc.index();
        let (r1, v1) = (new_rv[2 * idx], new_rv[2 * idx + 1]);
        for k in 0..3 {
            nav.x[Blocks::pos(sc) + k] = r1[k];
            nav.x[Blocks::vel(sc) + k] = v1[k];
            nav.x[Blocks::acc(sc) + k] *= phi_gm;
        }
    }
    nav.epoch = t1;
    nav.symmetrize();
    Ok(())
}

/// RK4 step of one spacecraft under the on-board force model plus a constant
/// RTN empirical acceleration.
fn rk4_with_alpha(
    r0: &Vector3<f64>,
    v0: &Vector3<f64>,
    alpha_rtn: &Vector3<f64>,
    t0: f64,
    dt: f64,
    forces: &crate::dynamics::ForceModelConfig,
    ball: &crate::dynamics::BallisticProperties,
) -> (Vector3<f64>, Vector3<f64>) {
    let accel = |t: f64, r: &Vector3<f64>, v: &Vector3<f64>| -> Vector3<f64> {
        let base = acceleration(r, v, t, forces, ball, ball.area);
        let basis = rtn_basis(&EciState { r: *r, v: *v });
        base + basis.transpose() * alpha_rtn
    };
    let h = dt;
    let k1r = *v0;
    let k1v = accel(t0, r0, v0);
    let k2r = v0 + k1v * (h / 2.0);
    let k2v = accel(t0 + h / 2.0, &(r0 + k1r * (h / 2.0)), &k2r);
    let k3r = v0 + k2v * (h / 2.0);
    let k3v = accel(t0 + h / 2.0, &(r0 + k2r * (h / 2.0)), &k3r);
    let k4r = v0 + k3v * h;
    let k4v = accel(t0 + h, &(r0 + k3r * h), &k4r);
    (
        r0 + (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (h / 6.0),
        v0 + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    )
}

/// Scalar EKF update; returns the normalized innovation squared, or None if
/// gated.
fn scalar_update(
    nav: &mut NavState,
    h_row: &DVector<f64>,
    innovation: f64,
    noise_var: f64,
    gate_sigma: f64,
) -> Option<f64> {
    let ph = &nav.cov * h_row;
    let s = h_row.dot(&ph) + noise_var;
    let nis = innovation * innovation / s;
    if nis > gate_sigma * gate_sigma {
        return None;
    }
    let k = ph / s;
    nav.x += &k * innovation;
    // P <- (I - K H) P, symmetrized.
    let kh_p = &k * (h_row.transpose() * &nav.cov);
    nav.cov -= kh_p;
    nav.symmetrize();
    Some(nis)
}

/// GRAPHIC update: z = (pseudorange + lambda * phase) / 2 per satellite of
/// the owner's receiver. The half-sum cancels the ionosphere; the model
/// carries the broadcast ephemeris and clock, the estimated antenna phase
/// center, and half a wavelength per float ambiguity cycle.
pub fn measurement_update_graphic(
    nav: &mut NavState,
    own: &[RawMeasurement],
    constellation: &GnssConstellation,
    body_to_eci: &Matrix3<f64>,
) -> Result<UpdateStats, NavError> {
    if own.is_empty() {
        return Err(NavError::NoMeasurements);
    }
    let owner = nav.owner;
    let epoch = own[0].epoch;
    nav.expire_slots(epoch);

    let mut stats = UpdateStats::default();
    for meas in own.iter().filter(|m| m.valid) {
        let Some(sat) = constellation.sats.iter().find(|s| s.id == meas.sat_id) else {
            continue;
        };
        let Some((slot, fresh)) = nav.zd_slot_for(meas.sat_id, epoch, meas.elevation) else {
            continue;
        };
        let amb_idx = Blocks::zd(slot);

        let z = 0.5 * (meas.pseudorange + meas.carrier_phase * GPS_L1_WAVELENGTH);
        let sat_pos = sat.broadcast_position(epoch).r;
        let pc = nav.phase_center(owner, body_to_eci);
        let range = (sat_pos - pc).norm();
        let h0 = range + nav.clock_m(owner) - sat.broadcast_clock_m();

        if fresh {
            let n0 = 2.0 * (z - h0) / GPS_L1_WAVELENGTH;
            nav.reset_component(amb_idx, n0, nav.config.ambiguity_prior_sigma);
        }
        let predicted = h0 + 0.5 * GPS_L1_WAVELENGTH * nav.x[amb_idx];

        let u = (sat_pos - pc) / range;
        let mut h_row = DVector::<f64>::zeros(STATE_DIM);
        for k in 0..3 {
            h_row[Blocks::pos(owner) + k] = -u[k];
        }
        let u_body = body_to_eci.transpose() * u;
        for k in 0..3 {
            h_row[Blocks::antenna(owner) + k] = -u_body[k];
        }
        h_row[Blocks::clock(owner)] = 1.0;
        h_row[amb_idx] = 0.5 * GPS_L1_WAVELENGTH;

        let r_var = nav.config.graphic_noise * nav.config.graphic_noise;
        match scalar_update(nav, &h_row, z - predicted, r_var, nav.config.gate_sigma) {
            Some(nis) => {
                stats.accepted += 1;
                stats.nis_sum += nis;
                if let Some(slot_state) = &mut nav.zd_slots[slot] {
                    slot_state.strikes = 0;
                }
            }
            None => {
                stats.rejected += 1;
                // Persistent huge innovations mean the pass restarted with a
                // new integer (cycle slip / masked re-acquisition): reset the
                // float from the data. A single outlier never trips this.
                let nis = (z - predicted) * (z - predicted)
                    / (r_var + 0.25 * GPS_L1_WAVELENGTH * GPS_L1_WAVELENGTH);
                if nis > 100.0 {
                    if let Some(slot_state) = &mut nav.zd_slots[slot] {
                        slot_state.strikes += 1;
                        if slot_state.strikes >= 2 {
                            slot_state.strikes = 0;
                            let n0 = 2.0 * (z - h0) / GPS_L1_WAVELENGTH;
                            nav.reset_component(amb_idx, n0, nav.config.ambiguity_prior_sigma);
                        }
                    }
                }
            }
        }
    }
    if stats.accepted == 0 {
        return Err(NavError::AllGated);
    }
    Ok(stats)
}

/// Single-difference carrier-phase update: z = lambda (phase_own -
/// phase_remote) per commonly observed satellite, cancelling the satellite
/// clock and sharpening the baseline plus differential clock.
pub fn measurement_update_sdcp(
    nav: &mut NavState,
    own: &[RawMeasurement],
    remote: &[RawMeasurement],
    constellation: &GnssConstellation,
    attitudes: &[Matrix3<f64>; 2],
) -> Result<UpdateStats, NavError> {
    if own.is_empty() || remote.is_empty() {
        return Err(NavError::NoMeasurements);
    }
    let owner = nav.owner;
    let other = owner.other();
    let epoch = own[0].epoch;

    let mut stats = UpdateStats::default();
    for m_own in own.iter().filter(|m| m.valid) {
        let Some(m_rem) = remote
            .iter()
            .find(|m| m.valid && m.sat_id == m_own.sat_id && (m.epoch - m_own.epoch).abs() < 1e-6)
        else {
            continue;
        };
        let Some(sat) = constellation.sats.iter().find(|s| s.id == m_own.sat_id) else {
            continue;
        };
        let Some((slot, fresh)) = nav.sd_slot_for(m_own.sat_id, epoch, m_own.elevation) else {
            continue;
        };
        if fresh {
            nav.iar_fixed = false;
        }
        let amb_idx = Blocks::sd(slot);

        let z = GPS_L1_WAVELENGTH * (m_own.carrier_phase - m_rem.carrier_phase);
        let sat_pos = sat.broadcast_position(epoch).r;
        let pc_own = nav.phase_center(owner, &attitudes[owner.index()]);
        let pc_rem = nav.phase_center(other, &attitudes[other.index()]);
        let range_own = (sat_pos - pc_own).norm();
        let range_rem = (sat_pos - pc_rem).norm();
        let h0 = range_own - range_rem + nav.clock_m(owner) - nav.clock_m(other);

        if fresh {
            let n0 = (z - h0) / GPS_L1_WAVELENGTH;
            nav.reset_component(amb_idx, n0, nav.config.ambiguity_prior_sigma);
        }
        let predicted = h0 + GPS_L1_WAVELENGTH * nav.x[amb_idx];

        let u_own = (sat_pos - pc_own) / range_own;
        let u_rem = (sat_pos - pc_rem) / range_rem;
        let mut h_row = DVector::<f64>::zeros(STATE_DIM);
        for k in 0..3 {
            h_row[Blocks::pos(owner) + k] = -u_own[k];
            h_row[Blocks::pos(other) + k] = u_rem[k];
        }
        let u_body_own = attitudes[owner.index()].transpose() * u_own;
        let u_body_rem = attitudes[other.index()].transpose() * u_rem;
        for k in 0..3 {
            h_row[Blocks::antenna(owner) + k] = -u_body_own[k];
            h_row[Blocks::antenna(other) + k] = u_body_rem[k];
        }
        h_row[Blocks::clock(owner)] = 1.0;
        h_row[Blocks::clock(other)] = -1.0;
        h_row[amb_idx] = GPS_L1_WAVELENGTH;

        let r_var = nav.config.sdcp_noise * nav.config.sdcp_noise;
        match scalar_update(nav, &h_row, z - predicted, r_var, nav.config.gate_sigma) {
            Some(nis) => {
                stats.accepted += 1;
                stats.nis_sum += nis;
                if let Some(slot_state) = &mut nav.sd_slots[slot] {
                    slot_state.strikes = 0;
                }
            }
            None => {
                stats.rejected += 1;
                let nis = (z - predicted) * (z - predicted)
                    / (r_var + GPS_L1_WAVELENGTH * GPS_L1_WAVELENGTH);
                if nis > 100.0 {
                    if let Some(slot_state) = &mut nav.sd_slots[slot] {
                        slot_state.strikes += 1;
                        if slot_state.strikes >= 2 {
                            slot_state.strikes = 0;
                            let n0 = (z - h0) / GPS_L1_WAVELENGTH;
                            nav.reset_component(amb_idx, n0, nav.config.ambiguity_prior_sigma);
                            nav.iar_fixed = false;
                        }
                    }
                }
            }
        }
    }
    if stats.accepted == 0 {
        return Err(NavError::AllGated);
    }
    Ok(stats)
}
