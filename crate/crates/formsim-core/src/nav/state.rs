use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::astro::EciState;
use crate::dynamics::{BallisticProperties, ForceModelConfig};
use crate::gnss::AntennaModel;
use crate::types::SpacecraftId;

/// Maximum tracked ambiguities of each kind.
pub const MAX_AMBIGUITIES: usize = 24;

/// Full allocated state dimension: two 13-state spacecraft blocks plus two
/// ambiguity banks.
pub const STATE_DIM: usize = 26 + 2 * MAX_AMBIGUITIES;

/// Index helpers into the state vector.
#[derive(Debug, Clone, Copy)]
pub struct Blocks;

impl Blocks {
    pub const fn pos(sc: SpacecraftId) -> usize {
        13 * sc_index(sc)
    }
    pub const fn vel(sc: SpacecraftId) -> usize {
        13 * sc_index(sc) + 3
    }
    pub const fn acc(sc: SpacecraftId) -> usize {
        13 * sc_index(sc) + 6
    }
    pub const fn clock(sc: SpacecraftId) -> usize {
        13 * sc_index(sc) + 9
    }
    pub const fn antenna(sc: SpacecraftId) -> usize {
        13 * sc_index(sc) + 10
    }
    pub const fn zd(slot: usize) -> usize {
        26 + slot
    }
    pub const fn sd(slot: usize) -> usize {
        26 + MAX_AMBIGUITIES + slot
    }
}

const fn sc_index(sc: SpacecraftId) -> usize {
    match sc {
        SpacecraftId::Dsc => 0,
        SpacecraftId::Osc => 1,
    }
}

/// Filter tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavConfig {
    /// Gauss-Markov time constant of the empirical accelerations [s].
    pub dmc_tau: f64,
    /// Steady-state 1-sigma of the empirical accelerations, RTN [m/s^2].
    pub dmc_sigma_rtn: [f64; 3],
    /// Receiver clock random-walk intensity [m/sqrt(s)].
    pub clock_walk: f64,
    /// Innovation gate [sigmas].
    pub gate_sigma: f64,
    /// GRAPHIC measurement noise 1-sigma [m].
    pub graphic_noise: f64,
    /// SDCP measurement noise 1-sigma [m].
    pub sdcp_noise: f64,
    /// Prior sigma of a freshly spawned float ambiguity [cycles].
    pub ambiguity_prior_sigma: f64,
    /// Drop an ambiguity slot after this long without a measurement [s].
    pub slot_timeout: f64,
    /// Small velocity process-noise floor [ (m/s)^2 / s ].
    pub velocity_noise_floor: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            dmc_tau: 600.0,
            dmc_sigma_rtn: [5e-8, 5e-7, 5e-8],
            clock_walk: 1.0,
            gate_sigma: 5.0,
            graphic_noise: 0.11,
            sdcp_noise: 0.004,
            ambiguity_prior_sigma: 150.0,
            // Matches the tracking-gap threshold after which the receiver
            // starts a fresh carrier pass.
            slot_timeout: 2.4,
            velocity_noise_floor: 1e-12,
        }
    }
}

/// One ambiguity slot: which satellite occupies it and when it was last fed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub sat_id: u8,
    pub last_epoch: f64,
    pub elevation: f64,
    /// Consecutive huge-innovation strikes (cycle-slip detector).
    pub strikes: u8,
}

/// Full navigation filter state (one instance per spacecraft).
#[derive(Debug, Clone)]
pub struct NavState {
    pub owner: SpacecraftId,
    pub epoch: f64,
    /// State mean over the fixed allocation.
    pub x: DVector<f64>,
    /// State covariance.
    pub cov: DMatrix<f64>,
    pub zd_slots: [Option<Slot>; MAX_AMBIGUITIES],
    pub sd_slots: [Option<Slot>; MAX_AMBIGUITIES],
    pub config: NavConfig,
    /// Filter's force model belief.
    pub forces: ForceModelConfig,
    pub ballistic: [BallisticProperties; 2],
    pub antennas: [AntennaModel; 2],
    /// Set after a successful integer fix until the SD bank changes.
    pub iar_fixed: bool,
}

impl NavState {
    /// Initialize around a priori spacecraft states with diagonal priors.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        owner: SpacecraftId,
        epoch: f64,
        dsc: &EciState,
        osc: &EciState,
        pos_sigma: f64,
        vel_sigma: f64,
        config: NavConfig,
        forces: ForceModelConfig,
        ballistic: [BallisticProperties; 2],
        antennas: [AntennaModel; 2],
    ) -> Self {
        let mut x = DVector::zeros(STATE_DIM);
        let mut cov = DMatrix::zeros(STATE_DIM, STATE_DIM);
        for (sc, state) in [(SpacecraftId::Dsc, dsc), (SpacecraftId::Osc, osc)] {
            for k in 0..3 {
                x[Blocks::pos(sc) + k] = state.r[k];
                x[Blocks::vel(sc) + k] = state.v[k];
                cov[(Blocks::pos(sc) + k, Blocks::pos(sc) + k)] = pos_sigma * pos_sigma;
                cov[(Blocks::vel(sc) + k, Blocks::vel(sc) + k)] = vel_sigma * vel_sigma;
                let sig_acc = config.dmc_sigma_rtn[k];
                cov[(Blocks::acc(sc) + k, Blocks::acc(sc) + k)] = sig_acc * sig_acc;
            }
            cov[(Blocks::clock(sc), Blocks::clock(sc))] = 1.0e4;
            // Antenna offset prior: boresight-dominated, from the phase
            // center uncertainty.
            let bore = 0.0854f64;
            let lateral = 0.002f64;
            cov[(Blocks::antenna(sc), Blocks::antenna(sc))] = lateral * lateral;
            cov[(Blocks::antenna(sc) + 1, Blocks::antenna(sc) + 1)] = lateral * lateral;
            cov[(Blocks::antenna(sc) + 2, Blocks::antenna(sc) + 2)] = bore * bore;
        }
        // Unused ambiguity slots carry a unit placeholder variance.
        for slot in 0..MAX_AMBIGUITIES {
            cov[(Blocks::zd(slot), Blocks::zd(slot))] = 1.0;
            cov[(Blocks::sd(slot), Blocks::sd(slot))] = 1.0;
        }
        NavState {
            owner,
            epoch,
            x,
            cov,
            zd_slots: [None; MAX_AMBIGUITIES],
            sd_slots: [None; MAX_AMBIGUITIES],
            config,
            forces,
            ballistic,
            antennas,
            iar_fixed: false,
        }
    }

    pub fn position(&self, sc: SpacecraftId) -> Vector3<f64> {
        let p = Blocks::pos(sc);
        Vector3::new(self.x[p], self.x[p + 1], self.x[p + 2])
    }

    pub fn velocity(&self, sc: SpacecraftId) -> Vector3<f64> {
        let v = Blocks::vel(sc);
        Vector3::new(self.x[v], self.x[v + 1], self.x[v + 2])
    }

    pub fn eci_state(&self, sc: SpacecraftId) -> EciState {
        EciState {
            r: self.position(sc),
            v: self.velocity(sc),
        }
    }

    pub fn empirical_accel(&self, sc: SpacecraftId) -> Vector3<f64> {
        let a = Blocks::acc(sc);
        Vector3::new(self.x[a], self.x[a + 1], self.x[a + 2])
    }

    pub fn clock_m(&self, sc: SpacecraftId) -> f64 {
        self.x[Blocks::clock(sc)]
    }

    pub fn antenna_offset(&self, sc: SpacecraftId) -> Vector3<f64> {
        let a = Blocks::antenna(sc);
        Vector3::new(self.x[a], self.x[a + 1], self.x[a + 2])
    }

    /// Estimated antenna phase center in ECI for a spacecraft, given its
    /// body-to-inertial rotation: known mount position plus the estimated
    /// body-frame offset (phase center and mounting bias).
    pub fn phase_center(&self, sc: SpacecraftId, body_to_eci: &Matrix3<f64>) -> Vector3<f64> {
        let nominal = self.antennas[sc.index()].mount_body;
        self.position(sc) + body_to_eci * (nominal + self.antenna_offset(sc))
    }

    /// Find or allocate the ZD slot for a satellite; returns (slot, fresh).
    pub fn zd_slot_for(&mut self, sat_id: u8, epoch: f64, elevation: f64) -> Option<(usize, bool)> {
        slot_for(
            &mut self.zd_slots,
            sat_id,
            epoch,
            elevation,
            self.config.slot_timeout,
        )
    }

    pub fn sd_slot_for(&mut self, sat_id: u8, epoch: f64, elevation: f64) -> Option<(usize, bool)> {
        slot_for(
            &mut self.sd_slots,
            sat_id,
            epoch,
            elevation,
            self.config.slot_timeout,
        )
    }

    /// Reset a state component to a fresh prior (slot reuse).
    pub fn reset_component(&mut self, idx: usize, value: f64, sigma: f64) {
        self.x[idx] = value;
        for k in 0..STATE_DIM {
            self.cov[(idx, k)] = 0.0;
            self.cov[(k, idx)] = 0.0;
        }
        self.cov[(idx, idx)] = sigma * sigma;
    }

    /// Expire stale ambiguity slots.
    pub fn expire_slots(&mut self, epoch: f64) {
        let timeout = self.config.slot_timeout;
        let mut sd_changed = false;
        for slot in 0..MAX_AMBIGUITIES {
            if let Some(s) = self.zd_slots[slot] {
                if epoch - s.last_epoch > timeout {
                    self.zd_slots[slot] = None;
                }
            }
            if let Some(s) = self.sd_slots[slot] {
                if epoch - s.last_epoch > timeout {
                    self.sd_slots[slot] = None;
                    sd_changed = true;
                }
            }
        }
        if sd_changed {
            self.iar_fixed = false;
        }
    }

    /// Active SD slots as (slot index, satellite id).
    pub fn active_sd(&self) -> Vec<(usize, u8)> {
        self.sd_slots
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.map(|slot| (k, slot.sat_id)))
            .collect()
    }

    /// Enforce covariance symmetry (rounding control).
    pub fn symmetrize(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        self.cov = sym;
    }

    /// Relative position/velocity covariance block mapped onto the deputy
    /// minus chief difference (6x6 in ECI).
    pub fn relative_eci_cov(&self) -> Matrix6<f64> {
        let mut j = DMatrix::<f64>::zeros(6, STATE_DIM);
        for k in 0..3 {
            j[(k, Blocks::pos(SpacecraftId::Osc) + k)] = 1.0;
            j[(k, Blocks::pos(SpacecraftId::Dsc) + k)] = -1.0;
            j[(3 + k, Blocks::vel(SpacecraftId::Osc) + k)] = 1.0;
            j[(3 + k, Blocks::vel(SpacecraftId::Dsc) + k)] = -1.0;
        }
        let full = &j * &self.cov * j.transpose();
        Matrix6::from_fn(|r, c| full[(r, c)])
    }
}

fn slot_for(
    slots: &mut [Option<Slot>; MAX_AMBIGUITIES],
    sat_id: u8,
    epoch: f64,
    elevation: f64,
    _timeout: f64,
) -> Option<(usize, bool)> {
    // Existing assignment.
    for (k, s) in slots.iter_mut().enumerate() {
        if let Some(slot) = s {
            if slot.sat_id == sat_id {
                slot.last_epoch = epoch;
                slot.elevation = elevation;
                return Some((k, false));
            }
        }
    }
    // Free slot.
    for (k, s) in slots.iter_mut().enumerate() {
        if s.is_none() {
            *s = Some(Slot {
                sat_id,
                last_epoch: epoch,
                elevation,
                strikes: 0,
            });
            return Some((k, true));
        }
    }
    // Bank full: evict the lowest-elevation occupant if the newcomer is
    // higher.
    let (worst_idx, worst_el) = slots
        .iter()
        .enumerate()
        .map(|(k, s)| (k, s.map(|x| x.elevation).unwrap_or(f64::INFINITY)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    if elevation > worst_el {
        slots[worst_idx] = Some(Slot {
            sat_id,
            last_epoch: epoch,
            elevation,
            strikes: 0,
        });
        Some((worst_idx, true))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_dimension_is_74() {
        assert_eq!(STATE_DIM, 74);
    }

    #[test]
    fn slot_allocation_reuses_and_evicts() {
        let mut slots: [Option<Slot>; MAX_AMBIGUITIES] = [None; MAX_AMBIGUITIES];
        for sat in 0..MAX_AMBIGUITIES as u8 {
            let (k, fresh) = slot_for(&mut slots, sat + 1, 0.0, 0.5 + sat as f64 * 0.01, 10.0)
                .unwrap();
            assert!(fresh);
            assert_eq!(k, sat as usize);
        }
        // Same satellite comes back to its slot.
        let (k, fresh) = slot_for(&mut slots, 5, 1.0, 0.6, 10.0).unwrap();
        assert_eq!(k, 4);
        assert!(!fresh);
        // Bank full: a higher-elevation newcomer evicts the lowest.
        let (k, fresh) = slot_for(&mut slots, 99, 2.0, 1.4, 10.0).unwrap();
        assert!(fresh);
        assert_eq!(k, 0, "lowest-elevation slot evicted");
        // A low-elevation newcomer is refused.
        assert!(slot_for(&mut slots, 100, 2.0, 0.01, 10.0).is_none());
    }
}
