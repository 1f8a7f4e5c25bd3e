//! Open-loop navigation campaign: truth dynamics and synthetic GNSS feeding
//! the two filter instances, without control. Checks absolute and relative
//! convergence, integer fixing, and the fix-vs-truth bookkeeping.

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use formsim_core::astro::{
    absolute_from_eci, absolute_from_roe, eci_from_absolute, roe_from_absolute, AbsoluteOrbit,
    RoeState,
};
use formsim_core::attitude::AttitudeProfile;
use formsim_core::consts::R_EARTH;
use formsim_core::dynamics::{
    density_mean_activity, density_solar_max, propagate_truth, BallisticProperties,
    ForceModelConfig, TruthState,
};
use formsim_core::gnss::{
    generate_measurements, AntennaModel, GnssConstellation, MeasurementConfig, ReceiverChannels,
};
use formsim_core::nav::{
    measurement_update_graphic, measurement_update_sdcp, relative_output, resolve_integers,
    time_update, IarStatus, NavConfig, NavState,
};
use formsim_core::types::SpacecraftId;

struct World {
    truth: TruthState,
    constellation: GnssConstellation,
    channels: [ReceiverChannels; 2],
    clocks: [f64; 2],
    ball: [BallisticProperties; 2],
    truth_forces: ForceModelConfig,
    attitude: AttitudeProfile,
    antennas: [AntennaModel; 2],
    meas_config: MeasurementConfig,
    rng: ChaCha12Rng,
}

impl World {
    fn new(seed: u64) -> (Self, AbsoluteOrbit) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let chief = AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.004,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        let standby = RoeState::new(0.0, 0.0, 0.0, 200.0, 0.0, 200.0);
        let deputy = absolute_from_roe(&chief, &standby).unwrap();
        let truth = TruthState {
            epoch: 0.0,
            dsc: eci_from_absolute(&chief).unwrap(),
            osc: eci_from_absolute(&deputy).unwrap(),
        };
        let constellation = GnssConstellation::nominal(28, 1.0, 0.5, &mut rng);
        let ball = [
            BallisticProperties {
                mass: 11.35,
                cd: 2.2,
                cr: 1.8,
                area: 0.25,
            },
            BallisticProperties {
                mass: 10.62,
                cd: 2.2,
                cr: 1.8,
                area: 0.22,
            },
        ];
        let truth_forces = ForceModelConfig {
            drag: density_solar_max(),
            ..ForceModelConfig::j2()
        };
        (
            World {
                truth,
                constellation,
                channels: [ReceiverChannels::default(), ReceiverChannels::default()],
                clocks: [0.0, 0.0],
                ball,
                truth_forces,
                attitude: AttitudeProfile::new(),
                antennas: [AntennaModel::default(), AntennaModel::default()],
                meas_config: MeasurementConfig::default(),
                rng,
            },
            chief,
        )
    }

    fn step_to(&mut self, t: f64) {
        self.truth = propagate_truth(
            &self.truth,
            &self.ball,
            &self.truth_forces,
            &[],
            t,
            None,
        )
        .unwrap();
        self.constellation.advance(t, &mut self.rng);
        // Receiver clock random walk, 1 m step per second.
        use rand_distr::{Distribution, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for c in &mut self.clocks {
            *c += n.sample(&mut self.rng);
        }
    }

    fn measurements(
        &mut self,
        t: f64,
    ) -> (
        Vec<formsim_core::gnss::RawMeasurement>,
        Vec<formsim_core::gnss::RawMeasurement>,
        [Matrix3<f64>; 2],
    ) {
        let att_dsc = self.attitude.body_to_eci(t, &self.truth.dsc);
        let att_osc = self.attitude.body_to_eci(t, &self.truth.osc);
        let m_dsc = generate_measurements(
            &self.constellation,
            SpacecraftId::Dsc,
            &self.truth.dsc,
            &att_dsc,
            &self.antennas[0],
            self.clocks[0],
            &self.meas_config,
            &mut self.channels[0],
            t,
            &mut self.rng,
        );
        let m_osc = generate_measurements(
            &self.constellation,
            SpacecraftId::Osc,
            &self.truth.osc,
            &att_osc,
            &self.antennas[1],
            self.clocks[1],
            &self.meas_config,
            &mut self.channels[1],
            t,
            &mut self.rng,
        );
        (m_dsc, m_osc, [att_dsc, att_osc])
    }

    fn truth_roe(&self, t: f64) -> RoeState {
        let chief = absolute_from_eci(&self.truth.dsc, t).unwrap();
        let deputy = absolute_from_eci(&self.truth.osc, t).unwrap();
        roe_from_absolute(&chief, &deputy).unwrap()
    }
}

#[test]
fn navigation_converges_and_fixes_integers() {
    let (mut world, _chief) = World::new(0xD161_7A1);

    // Filter initialized off-truth: 10 m / 1 cm/s per axis.
    let onboard_forces = ForceModelConfig {
        drag: density_mean_activity(),
        ..ForceModelConfig::j2()
    };
    let mut init_rng = ChaCha12Rng::seed_from_u64(5);
    use rand_distr::{Distribution, Normal};
    let n10 = Normal::new(0.0, 10.0).unwrap();
    let n001 = Normal::new(0.0, 0.01).unwrap();
    let mut dsc0 = world.truth.dsc;
    let mut osc0 = world.truth.osc;
    for k in 0..3 {
        dsc0.r[k] += n10.sample(&mut init_rng);
        dsc0.v[k] += n001.sample(&mut init_rng);
        osc0.r[k] += n10.sample(&mut init_rng);
        osc0.v[k] += n001.sample(&mut init_rng);
    }
    let mut nav = NavState::new(
        SpacecraftId::Dsc,
        0.0,
        &dsc0,
        &osc0,
        10.0,
        0.01,
        NavConfig::default(),
        onboard_forces,
        world.ball,
        world.antennas,
    );

    let orbit_period = 5676.98;
    let total = (1.5 * orbit_period) as usize;
    let mut first_fix: Option<usize> = None;
    let mut fixed_epochs = 0usize;
    let mut attempts_after_first_fix = 0usize;
    let mut wrong_fixes = 0usize;
    let mut last_rel_err = f64::INFINITY;
    let mut last_vel_err = f64::INFINITY;
    let mut rel_err_samples: Vec<f64> = Vec::new();
    let mut vel_err_samples: Vec<f64> = Vec::new();
    let mut trace_before_after: Option<(f64, f64)> = None;

    for epoch in 1..=total {
        let t = epoch as f64;
        world.step_to(t);
        let (m_dsc, m_osc, atts) = world.measurements(t);

        time_update(&mut nav, t, &[]).unwrap();
        if !m_dsc.is_empty() {
            let _ = measurement_update_graphic(&mut nav, &m_dsc, &world.constellation, &atts[0]);
        }
        if !m_dsc.is_empty() && !m_osc.is_empty() {
            let _ = measurement_update_sdcp(&mut nav, &m_dsc, &m_osc, &world.constellation, &atts);
        }

        if epoch % 10 == 0 {
            let trace_before = nav.relative_eci_cov().trace();
            let result = resolve_integers(&mut nav);
            if result.status == IarStatus::Fixed {
                if first_fix.is_none() {
                    first_fix = Some(epoch);
                    trace_before_after =
                        Some((trace_before, nav.relative_eci_cov().trace()));
                }
                fixed_epochs += 1;
                // Compare against truth double differences.
                let pivot = result.pivot.unwrap();
                let n_sd = |sat: u8| -> Option<i64> {
                    Some(
                        world.channels[0].ambiguity(sat)?
                            - world.channels[1].ambiguity(sat)?,
                    )
                };
                if let Some(pivot_sd) = n_sd(pivot) {
                    for (sat, fixed_dd) in &result.fixed {
                        if let Some(sd) = n_sd(*sat) {
                            if sd - pivot_sd != *fixed_dd {
                                wrong_fixes += 1;
                            }
                        }
                    }
                }
            }
            if first_fix.is_some() {
                attempts_after_first_fix += 1;
            }
        }

        // Relative accuracy tracking over the last half orbit.
        if epoch > total - (0.5 * orbit_period) as usize {
            let (roe_est, _) = relative_output(&nav).unwrap();
            let truth_roe = world.truth_roe(t);
            let chief_el = absolute_from_eci(&world.truth.dsc, t).unwrap();
            let est_rtn = formsim_core::astro::rtn_from_roe(
                &chief_el,
                &roe_est,
                chief_el.mean_arg_latitude(),
            );
            let truth_rtn = formsim_core::astro::rtn_from_roe(
                &chief_el,
                &truth_roe,
                chief_el.mean_arg_latitude(),
            );
            last_rel_err = (est_rtn.position() - truth_rtn.position()).norm();
            last_vel_err = (est_rtn.velocity() - truth_rtn.velocity()).norm();
            rel_err_samples.push(last_rel_err);
            vel_err_samples.push(last_vel_err);
        }
    }

    // Absolute accuracy: both spacecraft within 5 m 3D.
    let abs_dsc = (nav.position(SpacecraftId::Dsc) - world.truth.dsc.r).norm();
    let abs_osc = (nav.position(SpacecraftId::Osc) - world.truth.osc.r).norm();
    assert!(abs_dsc < 5.0, "DSC absolute error {abs_dsc} m");
    assert!(abs_osc < 5.0, "OSC absolute error {abs_osc} m");

    // Integer fixing achieved and kept.
    let first = first_fix.expect("no integer fix in 1.5 orbits");
    assert!(
        first < total / 2,
        "first fix too late: epoch {first} of {total}"
    );
    let availability = fixed_epochs as f64 / attempts_after_first_fix as f64;
    assert!(availability > 0.9, "fix availability {availability}");
    assert_eq!(wrong_fixes, 0, "wrong fixes against truth integers");

    // Relative accuracy after fixing: cm-level position, sub-mm/s velocity.
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let rel_rms = rms(&rel_err_samples);
    let vel_rms = rms(&vel_err_samples);
    assert!(rel_rms < 0.02, "relative position RMS {rel_rms} m");
    assert!(vel_rms < 1e-4, "relative velocity RMS {vel_rms} m/s");

    // Fixing never inflates the relative covariance.
    let (before, after) = trace_before_after.unwrap();
    assert!(after <= before * (1.0 + 1e-9), "fixing grew covariance");

    let _ = (last_rel_err, last_vel_err);
}

#[test]
fn two_instances_with_identical_inputs_agree() {
    let (mut world, _) = World::new(77);
    let onboard = ForceModelConfig {
        drag: density_mean_activity(),
        ..ForceModelConfig::j2()
    };
    let make = || {
        NavState::new(
            SpacecraftId::Dsc,
            0.0,
            &world.truth.dsc,
            &world.truth.osc,
            5.0,
            0.01,
            NavConfig::default(),
            onboard,
            world.ball,
            world.antennas,
        )
    };
    let mut nav_a = make();
    let mut nav_b = make();
    for epoch in 1..=120 {
        let t = epoch as f64;
        world.step_to(t);
        let (m_dsc, m_osc, atts) = world.measurements(t);
        for nav in [&mut nav_a, &mut nav_b] {
            time_update(nav, t, &[]).unwrap();
            let _ = measurement_update_graphic(nav, &m_dsc, &world.constellation, &atts[0]);
            let _ = measurement_update_sdcp(nav, &m_dsc, &m_osc, &world.constellation, &atts);
        }
    }
    let (roe_a, _) = relative_output(&nav_a).unwrap();
    let (roe_b, _) = relative_output(&nav_b).unwrap();
    let diff = (roe_a.to_vector() - roe_b.to_vector()).norm();
    assert!(diff < 1e-9, "identical inputs diverged: {diff}");
}
