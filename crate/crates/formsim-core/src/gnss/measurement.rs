use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::constellation::GnssConstellation;
use super::klobuchar::{klobuchar_delay, KlobucharModel};
use crate::astro::EciState;
use crate::consts::GPS_L1_WAVELENGTH;
use crate::types::SpacecraftId;

/// GNSS antenna mounted on the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaModel {
    /// Boresight direction in the body frame (unit).
    pub boresight_body: Vector3<f64>,
    /// Nominal mount position of the antenna base in the body frame [m].
    pub mount_body: Vector3<f64>,
    /// True phase-center offset along the boresight from the base [m].
    pub phase_center_offset: f64,
    /// Mounting direction error [rad], applied as a fixed tilt.
    pub mounting_error: f64,
    /// Elevation mask above the antenna plane [rad].
    pub elevation_mask: f64,
}

impl AntennaModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.elevation_mask) {
            return Err("elevation mask must lie in [0, pi/2)".into());
        }
        Ok(())
    }

    /// Phase-center position in the body frame, with the mounting tilt
    /// folded in.
    pub fn phase_center_body(&self) -> Vector3<f64> {
        self.mount_body + self.tilted_boresight() * self.phase_center_offset
    }

    fn tilted_boresight(&self) -> Vector3<f64> {
        // Fixed small tilt about a deterministic perpendicular axis.
        let b = self.boresight_body.normalize();
        let perp = if b.x.abs() < 0.9 {
            Vector3::x().cross(&b).normalize()
        } else {
            Vector3::y().cross(&b).normalize()
        };
        nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(perp),
            self.mounting_error,
        ) * b
    }
}

impl Default for AntennaModel {
    fn default() -> Self {
        AntennaModel {
            boresight_body: Vector3::z(),
            mount_body: Vector3::new(0.0, 0.0, 0.15),
            phase_center_offset: 0.0854,
            mounting_error: 30.0 / 3600.0 * std::f64::consts::PI / 180.0,
            elevation_mask: 5f64.to_radians(),
        }
    }
}

/// One raw single-frequency observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMeasurement {
    pub sat_id: u8,
    pub receiver: SpacecraftId,
    pub epoch: f64,
    /// Pseudorange [m].
    pub pseudorange: f64,
    /// Carrier phase [cycles].
    pub carrier_phase: f64,
    /// Elevation above the antenna plane [rad].
    pub elevation: f64,
    pub valid: bool,
}

/// Error budget and switches for measurement generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    /// Pseudorange thermal noise, 1-sigma [m].
    pub pseudorange_noise: f64,
    /// Carrier-phase thermal noise, 1-sigma [m].
    pub carrier_noise: f64,
    pub iono: Option<KlobucharModel>,
    /// Probability per satellite per epoch of a cycle slip.
    pub cycle_slip_probability: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            pseudorange_noise: 0.20,
            carrier_noise: 0.002,
            iono: Some(KlobucharModel::default()),
            cycle_slip_probability: 0.0,
        }
    }
}

/// Per-receiver carrier tracking state: the integer ambiguity of each
/// continuous pass, in cycles.
#[derive(Debug, Clone, Default)]
pub struct ReceiverChannels {
    channels: BTreeMap<u8, Channel>,
    /// Ground-truth record of injected cycle slips (sat, epoch).
    pub slip_log: Vec<(u8, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Channel {
    ambiguity: i64,
    last_epoch: f64,
}

impl ReceiverChannels {
    /// Truth integer ambiguity currently tracked for a satellite, if any.
    pub fn ambiguity(&self, sat_id: u8) -> Option<i64> {
        self.channels.get(&sat_id).map(|c| c.ambiguity)
    }
}

/// Generate the visible raw measurements for one receiver at `epoch`.
///
/// Pseudorange = geometric range to the true phase center + c(dt_rx - dt_sat)
/// + iono + noise; carrier phase carries the opposite iono sign and the
/// per-pass integer ambiguity. Only satellites above the antenna elevation
/// mask are returned; continuity bookkeeping (new passes, cycle slips) is
/// kept in `channels`.
#[allow(clippy::too_many_arguments)]
pub fn generate_measurements(
    constellation: &GnssConstellation,
    receiver: SpacecraftId,
    receiver_state: &EciState,
    body_to_eci: &Matrix3<f64>,
    antenna: &AntennaModel,
    receiver_clock_m: f64,
    config: &MeasurementConfig,
    channels: &mut ReceiverChannels,
    epoch: f64,
    rng: &mut impl Rng,
) -> Vec<RawMeasurement> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let phase_center = receiver_state.r + body_to_eci * antenna.phase_center_body();
    let boresight = body_to_eci * antenna.boresight_body.normalize();

    let mut out = Vec::new();
    for sat in &constellation.sats {
        let sat_state = sat.true_position(epoch);
        let los = sat_state.r - phase_center;
        let range = los.norm();
        let los_unit = los / range;
        let elevation = std::f64::consts::FRAC_PI_2 - boresight.angle(&los_unit);
        if elevation <= antenna.elevation_mask {
            channels.channels.remove(&sat.id);
            continue;
        }

        // Pass bookkeeping: fresh ambiguity on a new pass, slips injected at
        // the configured rate.
        let channel = match channels.channels.get_mut(&sat.id) {
            Some(c) if epoch - c.last_epoch < 2.5 => {
                if config.cycle_slip_probability > 0.0
                    && rng.gen::<f64>() < config.cycle_slip_probability
                {
                    let mut jump = 0i64;
                    while jump == 0 {
                        jump = rng.gen_range(-10i64..=10);
                    }
                    c.ambiguity += jump;
                    channels.slip_log.push((sat.id, epoch));
                }
                c.last_epoch = epoch;
                *c
            }
            _ => {
                let fresh = Channel {
                    ambiguity: rng.gen_range(-100_000i64..=100_000),
                    last_epoch: epoch,
                };
                channels.channels.insert(sat.id, fresh);
                fresh
            }
        };

        let iono = match &config.iono {
            Some(model) => klobuchar_delay(model, &phase_center, &sat_state.r, epoch),
            None => 0.0,
        };
        let clock_term = receiver_clock_m - sat.clock_m;

        let pseudorange = range
            + clock_term
            + iono
            + config.pseudorange_noise * normal.sample(rng);
        let phase_m = range + clock_term - iono + config.carrier_noise * normal.sample(rng);
        let carrier_phase = phase_m / GPS_L1_WAVELENGTH + channel.ambiguity as f64;

        out.push(RawMeasurement {
            sat_id: sat.id,
            receiver,
            epoch,
            pseudorange,
            carrier_phase,
            elevation,
            valid: true,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{absolute_from_roe, eci_from_absolute, AbsoluteOrbit, RoeState};
    use crate::attitude::AttitudeProfile;
    use crate::consts::R_EARTH;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn leo_state(m: f64) -> EciState {
        let orbit = AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.001,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            m,
            0.0,
        )
        .unwrap();
        eci_from_absolute(&orbit).unwrap()
    }

    fn noise_free_config() -> MeasurementConfig {
        MeasurementConfig {
            pseudorange_noise: 0.0,
            carrier_noise: 0.0,
            iono: None,
            cycle_slip_probability: 0.0,
        }
    }

    fn clean_antenna() -> AntennaModel {
        AntennaModel {
            mount_body: Vector3::zeros(),
            phase_center_offset: 0.0,
            mounting_error: 0.0,
            ..AntennaModel::default()
        }
    }

    #[test]
    fn noise_free_pseudorange_equals_geometric_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut constellation = GnssConstellation::nominal(24, 0.0, 0.0, &mut rng);
        for sat in &mut constellation.sats {
            sat.clock_m = 0.0;
        }
        let state = leo_state(0.4);
        let attitude = AttitudeProfile::new();
        let mut channels = ReceiverChannels::default();
        let meas = generate_measurements(
            &constellation,
            SpacecraftId::Dsc,
            &state,
            &attitude.body_to_eci(0.0, &state),
            &clean_antenna(),
            0.0,
            &noise_free_config(),
            &mut channels,
            0.0,
            &mut rng,
        );
        assert!(!meas.is_empty());
        for m in &meas {
            let sat = constellation.sats.iter().find(|s| s.id == m.sat_id).unwrap();
            let range = (sat.true_position(0.0).r - state.r).norm();
            assert!((m.pseudorange - range).abs() < 1e-6, "sat {}", m.sat_id);
            // Phase minus range is an integer number of wavelengths.
            let residual_cycles = m.carrier_phase - range / GPS_L1_WAVELENGTH;
            assert!(
                (residual_cycles - residual_cycles.round()).abs() < 1e-6,
                "phase residual {residual_cycles}"
            );
        }
    }

    #[test]
    fn zenith_visibility_count_is_plausible() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let constellation = GnssConstellation::nominal(28, 1.0, 0.5, &mut rng);
        let attitude = AttitudeProfile::new();
        for k in 0..24 {
            let state = leo_state(k as f64 * 0.26);
            let mut channels = ReceiverChannels::default();
            let meas = generate_measurements(
                &constellation,
                SpacecraftId::Dsc,
                &state,
                &attitude.body_to_eci(0.0, &state),
                &AntennaModel::default(),
                0.0,
                &noise_free_config(),
                &mut channels,
                0.0,
                &mut rng,
            );
            assert!(
                (5..=16).contains(&meas.len()),
                "epoch {k}: {} visible",
                meas.len()
            );
        }
    }

    #[test]
    fn single_difference_cancels_satellite_clock() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut constellation = GnssConstellation::nominal(24, 0.0, 0.0, &mut rng);
        let chief = AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.001,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            0.7,
            0.0,
        )
        .unwrap();
        let deputy =
            absolute_from_roe(&chief, &RoeState::new(0.0, 0.0, 0.0, 200.0, 0.0, 200.0)).unwrap();
        let s_a = eci_from_absolute(&chief).unwrap();
        let s_b = eci_from_absolute(&deputy).unwrap();
        let attitude = AttitudeProfile::new();

        let run = |constellation: &GnssConstellation, rng: &mut ChaCha12Rng| {
            let mut ch_a = ReceiverChannels::default();
            let mut ch_b = ReceiverChannels::default();
            // Freeze ambiguity draws by reseeding a dedicated stream.
            let mut amb_rng = ChaCha12Rng::seed_from_u64(99);
            let ma = generate_measurements(
                constellation,
                SpacecraftId::Dsc,
                &s_a,
                &attitude.body_to_eci(0.0, &s_a),
                &clean_antenna(),
                3.0,
                &noise_free_config(),
                &mut ch_a,
                0.0,
                &mut amb_rng,
            );
            let mb = generate_measurements(
                constellation,
                SpacecraftId::Osc,
                &s_b,
                &attitude.body_to_eci(0.0, &s_b),
                &clean_antenna(),
                -2.0,
                &noise_free_config(),
                &mut ch_b,
                0.0,
                &mut amb_rng,
            );
            let _ = rng;
            (ma, mb)
        };

        let (ma0, mb0) = run(&constellation, &mut rng);
        // Re-run with satellite clocks shifted: single differences must not
        // move.
        for sat in &mut constellation.sats {
            sat.clock_m += 123.456;
        }
        let (ma1, mb1) = run(&constellation, &mut rng);

        let mut checked = 0;
        for a0 in &ma0 {
            let (Some(b0), Some(a1), Some(b1)) = (
                mb0.iter().find(|m| m.sat_id == a0.sat_id),
                ma1.iter().find(|m| m.sat_id == a0.sat_id),
                mb1.iter().find(|m| m.sat_id == a0.sat_id),
            ) else {
                continue;
            };
            let sd0 = a0.carrier_phase - b0.carrier_phase;
            let sd1 = a1.carrier_phase - b1.carrier_phase;
            assert!((sd0 - sd1).abs() < 1e-9, "sat {}", a0.sat_id);
            // The undifferenced phases themselves do move.
            assert!((a0.carrier_phase - a1.carrier_phase).abs() > 1.0);
            checked += 1;
        }
        assert!(checked >= 4, "only {checked} common satellites");
    }

    #[test]
    fn graphic_combination_cancels_the_ionosphere() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let constellation = GnssConstellation::nominal(24, 0.0, 0.0, &mut rng);
        let state = leo_state(1.9);
        let attitude = AttitudeProfile::new();
        let antenna = clean_antenna();

        let gen = |iono: Option<KlobucharModel>| {
            let mut channels = ReceiverChannels::default();
            let mut amb_rng = ChaCha12Rng::seed_from_u64(55);
            generate_measurements(
                &constellation,
                SpacecraftId::Dsc,
                &state,
                &attitude.body_to_eci(0.0, &state),
                &antenna,
                1.5,
                &MeasurementConfig {
                    pseudorange_noise: 0.0,
                    carrier_noise: 0.0,
                    iono,
                    cycle_slip_probability: 0.0,
                },
                &mut channels,
                43_000.0,
                &mut amb_rng,
            )
        };
        let with_iono = gen(Some(KlobucharModel::default()));
        let without = gen(None);
        for (a, b) in with_iono.iter().zip(without.iter()) {
            assert_eq!(a.sat_id, b.sat_id);
            // Iono moved the raw observables...
            assert!((a.pseudorange - b.pseudorange).abs() > 0.5);
            // ...but the half-sum is iono-free (down to f64 rounding at the
            // 2e7 m range scale).
            let g_a = 0.5 * (a.pseudorange + a.carrier_phase * GPS_L1_WAVELENGTH);
            let g_b = 0.5 * (b.pseudorange + b.carrier_phase * GPS_L1_WAVELENGTH);
            assert!((g_a - g_b).abs() < 1e-6, "sat {}", a.sat_id);
        }
    }

    #[test]
    fn cycle_slips_change_the_integer_and_are_logged() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let constellation = GnssConstellation::nominal(24, 0.0, 0.0, &mut rng);
        let state = leo_state(0.0);
        let attitude = AttitudeProfile::new();
        let mut channels = ReceiverChannels::default();
        let config = MeasurementConfig {
            cycle_slip_probability: 0.05,
            ..noise_free_config()
        };
        for epoch in 0..200 {
            let _ = generate_measurements(
                &constellation,
                SpacecraftId::Dsc,
                &state,
                &attitude.body_to_eci(0.0, &state),
                &clean_antenna(),
                0.0,
                &config,
                &mut channels,
                epoch as f64,
                &mut rng,
            );
        }
        assert!(
            !channels.slip_log.is_empty(),
            "no cycle slips injected in 200 epochs at 5%"
        );
    }
}
