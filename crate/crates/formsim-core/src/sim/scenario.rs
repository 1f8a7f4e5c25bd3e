use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix6, Vector3};
use rand_distr::{Distribution, Normal};

use super::config::ScenarioConfig;
use super::guidance::ScienceGuidance;
use super::report::{NavReport, ObservationRecord, RunReport, SafetyReport};
use super::rng::SeedTree;
use super::telemetry::{Event, StateRow, Telemetry};
use crate::astro::{
    absolute_from_eci, absolute_from_roe, eci_from_absolute, roe_from_absolute, rtn_from_roe,
    AbsoluteOrbit, RoeState,
};
use crate::attitude::{AttitudeProfile, PointingWindow, SETTLE_MARGIN_S};
use crate::control::{
    buffer_maneuver, mpc_replan_decision, plan_closed_form, plan_escape, plan_reachable_set_mpc,
    plan_tikhonov, transfer_guidance, ControlTarget, EscapeConfig, Maneuver, ManeuverStatus,
    ReplanDecision, TargetKind, TransferConfig, MANEUVER_SPACING_S, MAX_IMPULSE_DV,
};
use crate::dynamics::{propagate_truth, stm_j2, ImpulsiveBurn, TruthState};
use crate::gnss::{
    generate_measurements, AntennaModel, GnssConstellation, RawMeasurement, ReceiverChannels,
};
use crate::mission::{
    evaluate_alignment, execute_maneuver, mode_step, ActuatorState, AlignmentSample, Crosslink,
    CrosslinkPayload, ExecutionOutcome, InternalGeometry, MissionMode, ModeEvents, ModeState,
    TransferDirection,
};
use crate::nav::{
    measurement_update_graphic, measurement_update_sdcp, relative_output, resolve_integers,
    time_update, IarStatus, NavState,
};
use crate::safety::{check_passive_safety, MonitorAction, SafetyMonitor};
use crate::types::SpacecraftId;

/// Lead time the committer keeps between commit and execution [s].
const COMMIT_LEAD_S: f64 = 2.0;
/// Observation window length [s].
const OBS_WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum SciencePhase {
    Far,
    Terminal,
    Window,
}

struct ScienceCycle {
    t_obs: f64,
    /// Target at the last-burn epoch (t_obs - settle margin), chosen so the
    /// coast to t_obs lands on the alignment state.
    target: ControlTarget,
    phase: SciencePhase,
    last_replan_check: f64,
    planned: bool,
    samples: Vec<AlignmentSample>,
}

/// Everything the closed loop owns.
pub struct Simulation {
    pub config: ScenarioConfig,
    seed_tree: SeedTree,
    period: f64,

    // Truth side.
    truth: TruthState,
    constellation: GnssConstellation,
    channels: [ReceiverChannels; 2],
    receiver_clocks: [f64; 2],
    truth_antennas: [AntennaModel; 2],
    geometry: InternalGeometry,
    pending_burns: Vec<ImpulsiveBurn>,

    // Flight side.
    navs: [NavState; 2],
    attitude: AttitudeProfile,
    prev_meas: [Option<Vec<RawMeasurement>>; 2],
    prev_atts: [Option<Matrix3<f64>>; 2],
    remote_meas: [Option<Vec<RawMeasurement>>; 2],
    remote_atts: [Option<Matrix3<f64>>; 2],
    known_burns: [Vec<ImpulsiveBurn>; 2],
    links: [Crosslink; 2], // index by sender

    // Mission / control.
    mode: ModeState,
    active: SpacecraftId,
    committed: Vec<Maneuver>,
    actuators: [ActuatorState; 2],
    monitor: SafetyMonitor,
    guidance: ScienceGuidance,
    transfer_legs: Vec<ControlTarget>,
    transfer_leg_planned: bool,
    last_stationkeeping: f64,
    science: Option<ScienceCycle>,
    escape_planned: bool,
    observation_index: u32,
    campaign_done: bool,
    est_cache: Option<(RoeState, Matrix6<f64>, f64)>,

    // Randomness.
    rng_gnss: rand_chacha::ChaCha12Rng,
    rng_clock: rand_chacha::ChaCha12Rng,
    rng_actuator: rand_chacha::ChaCha12Rng,
    rng_link: rand_chacha::ChaCha12Rng,

    // Bookkeeping.
    pub telemetry: Telemetry,
    dv_by_mode: BTreeMap<String, f64>,
    nav_err_window: Vec<(f64, f64, f64)>,
    iar_attempts_after_fix: usize,
    iar_fixed_count: usize,
    wrong_fixes: usize,
    first_fix: Option<f64>,
    safety_checks: usize,
    escalations: usize,
    min_safety_margin: f64,
    observations: Vec<ObservationRecord>,
    t: f64,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, run_index: u64) -> Result<Self, String> {
        config.validate()?;
        let seed_tree = SeedTree::new(config.master_seed, run_index);
        let chief0 = config.orbit.orbit().map_err(|e| e.to_string())?;
        let period = chief0.period();

        let standby: RoeState = config.modes.standby.into();
        let deputy0 = absolute_from_roe(&chief0, &standby).map_err(|e| e.to_string())?;
        let truth = TruthState {
            epoch: 0.0,
            dsc: eci_from_absolute(&chief0).map_err(|e| e.to_string())?,
            osc: eci_from_absolute(&deputy0).map_err(|e| e.to_string())?,
        };

        let mut rng_world = seed_tree.stream("world");
        let constellation = GnssConstellation::nominal(
            config.gnss.satellite_count,
            config.gnss.ephemeris_roe_sigma,
            config.gnss.clock_bias_sigma,
            &mut rng_world,
        );

        // Geometry realizations.
        let mut rng_geom = seed_tree.stream("geometry");
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut sample3 = |sigma: f64| {
            Vector3::new(
                sigma * normal.sample(&mut rng_geom),
                sigma * normal.sample(&mut rng_geom),
                sigma * normal.sample(&mut rng_geom),
            )
        };
        let com_dsc = sample3(config.geometry.com_sigma);
        let com_osc = sample3(config.geometry.com_sigma);
        let mount_dsc = sample3(config.geometry.mount_position_sigma);
        let mount_osc = sample3(config.geometry.mount_position_sigma);
        let geometry = InternalGeometry {
            detector_body: Vector3::from_column_slice(&config.geometry.detector_body),
            sieve_body: Vector3::from_column_slice(&config.geometry.sieve_body),
            com_error_dsc: com_dsc,
            com_error_osc: com_osc,
            mount_error_dsc: mount_dsc,
            mount_error_osc: mount_osc,
        };

        // Antennas: truth carries the phase-center and center-of-mass error
        // realizations, the filter belief carries the nominal mount only.
        let nominal_antenna = AntennaModel::default();
        let mut truth_antennas = [nominal_antenna, nominal_antenna];
        for (idx, com) in [com_dsc, com_osc].iter().enumerate() {
            let pco = config.geometry.phase_center_sigma * normal.sample(&mut rng_geom);
            let tilt = config.geometry.mount_direction_sigma * normal.sample(&mut rng_geom);
            truth_antennas[idx] = AntennaModel {
                mount_body: nominal_antenna.mount_body - com,
                phase_center_offset: pco,
                mounting_error: tilt,
                ..nominal_antenna
            };
        }
        let filter_antennas = [
            AntennaModel {
                phase_center_offset: 0.0,
                mounting_error: 0.0,
                ..nominal_antenna
            },
            AntennaModel {
                phase_center_offset: 0.0,
                mounting_error: 0.0,
                ..nominal_antenna
            },
        ];

        // Filters start from a perturbed truth.
        let mut rng_nav = seed_tree.stream("nav-init");
        let n10 = Normal::new(0.0, 10.0).unwrap();
        let n001 = Normal::new(0.0, 0.01).unwrap();
        let mut dsc_init = truth.dsc;
        let mut osc_init = truth.osc;
        for k in 0..3 {
            dsc_init.r[k] += n10.sample(&mut rng_nav);
            dsc_init.v[k] += n001.sample(&mut rng_nav);
            osc_init.r[k] += n10.sample(&mut rng_nav);
            osc_init.v[k] += n001.sample(&mut rng_nav);
        }
        let ball = [config.dsc.ballistic(), config.osc.ballistic()];
        let make_nav = |owner: SpacecraftId| {
            NavState::new(
                owner,
                0.0,
                &dsc_init,
                &osc_init,
                10.0,
                0.01,
                config.nav,
                config.forces.onboard(),
                ball,
                filter_antennas,
            )
        };

        let guidance = ScienceGuidance::derive(
            &chief0,
            &config.modes.science.into(),
            Vector3::from_column_slice(&config.geometry.detector_body),
            Vector3::from_column_slice(&config.geometry.sieve_body),
        );

        Ok(Simulation {
            seed_tree,
            period,
            truth,
            constellation,
            channels: [ReceiverChannels::default(), ReceiverChannels::default()],
            receiver_clocks: [0.0, 0.0],
            truth_antennas,
            geometry,
            pending_burns: Vec::new(),
            navs: [make_nav(SpacecraftId::Dsc), make_nav(SpacecraftId::Osc)],
            attitude: AttitudeProfile::new(),
            prev_meas: [None, None],
            prev_atts: [None, None],
            remote_meas: [None, None],
            remote_atts: [None, None],
            known_burns: [Vec::new(), Vec::new()],
            links: [
                Crosslink::new(config.crosslink.latency_s, config.crosslink.drop_probability),
                Crosslink::new(config.crosslink.latency_s, config.crosslink.drop_probability),
            ],
            mode: ModeState {
                mode: MissionMode::Standby,
                transfer_direction: None,
                observations_done: 0,
                observations_commanded: config.campaign.observations,
            },
            active: SpacecraftId::Osc,
            committed: Vec::new(),
            actuators: [
                ActuatorState::new(config.dsc.propellant_kg),
                ActuatorState::new(config.osc.propellant_kg),
            ],
            monitor: SafetyMonitor::default(),
            guidance,
            transfer_legs: Vec::new(),
            transfer_leg_planned: false,
            last_stationkeeping: 0.0,
            science: None,
            escape_planned: false,
            observation_index: 0,
            campaign_done: false,
            est_cache: None,
            rng_gnss: seed_tree.stream("gnss-noise"),
            rng_clock: seed_tree.stream("clocks"),
            rng_actuator: seed_tree.stream("actuator"),
            rng_link: seed_tree.stream("crosslink"),
            telemetry: Telemetry::default(),
            dv_by_mode: BTreeMap::new(),
            nav_err_window: Vec::new(),
            iar_attempts_after_fix: 0,
            iar_fixed_count: 0,
            wrong_fixes: 0,
            first_fix: None,
            safety_checks: 0,
            escalations: 0,
            min_safety_margin: f64::INFINITY,
            observations: Vec::new(),
            config,
            t: 0.0,
        })
    }

    /// True chief elements at the current truth epoch.
    fn truth_chief_elements(&self) -> AbsoluteOrbit {
        absolute_from_eci(&self.truth.dsc, self.t).expect("valid truth")
    }

    fn truth_roe(&self) -> RoeState {
        let chief = self.truth_chief_elements();
        let deputy = absolute_from_eci(&self.truth.osc, self.t).expect("valid truth");
        roe_from_absolute(&chief, &deputy).expect("valid roe")
    }

    /// Mean chief model used by planners: filter estimate of the chief.
    fn nav_chief(&self) -> AbsoluteOrbit {
        let nav = &self.navs[self.active.index()];
        let mut el =
            absolute_from_eci(&nav.eci_state(SpacecraftId::Dsc), nav.epoch).expect("valid chief");
        el.epoch = nav.epoch;
        el
    }

    fn mode_label(&self) -> String {
        match (self.mode.mode, self.mode.transfer_direction) {
            (MissionMode::Transfer, Some(TransferDirection::ToScience)) => {
                "transfer_to_science".into()
            }
            (MissionMode::Transfer, _) => "transfer_to_standby".into(),
            (m, _) => format!("{m:?}").to_lowercase(),
        }
    }

    /// One 1 Hz tick: advance truth to `t`, run both filters, the safety
    /// monitor, the mode logic and control stack, and actuation.
    fn step(&mut self) -> Result<(), String> {
        let t = self.t + 1.0;

        // Deliver crosslink traffic due by now (sent last tick).
        for sender in [SpacecraftId::Dsc, SpacecraftId::Osc] {
            let receiver = sender.other();
            for msg in self.links[sender.index()].deliver(t) {
                match msg.payload {
                    CrosslinkPayload::Measurements(m) => {
                        self.remote_meas[receiver.index()] = Some(m);
                    }
                    CrosslinkPayload::Attitude { body_to_eci, .. } => {
                        self.remote_atts[receiver.index()] = Some(body_to_eci);
                    }
                    CrosslinkPayload::ManeuverNotice(m) => {
                        self.known_burns[receiver.index()].push(ImpulsiveBurn {
                            epoch: m.epoch,
                            dv_rtn: m.dv_rtn,
                            actor: m.actor,
                        });
                    }
                    CrosslinkPayload::Time(_) => {}
                }
            }
        }

        // SDCP for the previous epoch: the filter is still at that epoch.
        for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
            let idx = sc.index();
            if let (Some(own), Some(remote), Some(own_att), Some(rem_att)) = (
                self.prev_meas[idx].as_ref(),
                self.remote_meas[idx].as_ref(),
                self.prev_atts[idx].as_ref(),
                self.remote_atts[idx].as_ref(),
            ) {
                if !own.is_empty()
                    && !remote.is_empty()
                    && (own[0].epoch - remote[0].epoch).abs() < 1e-6
                {
                    let mut atts = [Matrix3::identity(); 2];
                    atts[sc.index()] = *own_att;
                    atts[sc.other().index()] = *rem_att;
                    let _ = measurement_update_sdcp(
                        &mut self.navs[idx],
                        own,
                        remote,
                        &self.constellation,
                        &atts,
                    );
                }
            }
            self.remote_meas[idx] = None;
            self.remote_atts[idx] = None;
        }

        // Truth propagation across (t-1, t], applying realized burns.
        self.pending_burns.sort_by(|a, b| a.epoch.total_cmp(&b.epoch));
        let attitude = self.attitude.clone();
        let areas = [
            self.config.dsc.cross_section_m2,
            self.config.osc.cross_section_m2,
        ];
        let area_fn = |time: f64, id: SpacecraftId| -> f64 {
            // Blend toward the maximum cross-section in observation attitude.
            let state = match id {
                SpacecraftId::Dsc => &self.truth.dsc,
                SpacecraftId::Osc => &self.truth.osc,
            };
            let blend = attitude.area_blend(time, state);
            areas[id.index()] * (1.0 + 0.6 * blend)
        };
        let ball = [self.config.dsc.ballistic(), self.config.osc.ballistic()];
        self.truth = propagate_truth(
            &self.truth,
            &ball,
            &self.config.forces.truth(),
            &self.pending_burns,
            t,
            Some(&area_fn),
        )
        .map_err(|e| e.to_string())?;
        self.pending_burns.retain(|b| b.epoch >= t);

        // Clocks and constellation.
        self.constellation.advance(t, &mut self.rng_clock);
        let n = Normal::new(0.0, 1.0).unwrap();
        for c in &mut self.receiver_clocks {
            *c += n.sample(&mut self.rng_clock);
        }

        // Measurements at t.
        let atts_now = [
            self.attitude.body_to_eci(t, &self.truth.dsc),
            self.attitude.body_to_eci(t, &self.truth.osc),
        ];
        let meas_config = self.config.gnss.measurement_config();
        let mut meas_now: [Vec<RawMeasurement>; 2] = [Vec::new(), Vec::new()];
        for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
            let idx = sc.index();
            let state = *self.truth.state_of(sc);
            meas_now[idx] = generate_measurements(
                &self.constellation,
                sc,
                &state,
                &atts_now[idx],
                &self.truth_antennas[idx],
                self.receiver_clocks[idx],
                &meas_config,
                &mut self.channels[idx],
                t,
                &mut self.rng_gnss,
            );
        }

        // Filter time update + GRAPHIC at t.
        for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
            let idx = sc.index();
            self.known_burns[idx].retain(|b| b.epoch > self.navs[idx].epoch);
            let burns = self.known_burns[idx].clone();
            time_update(&mut self.navs[idx], t, &burns).map_err(|e| e.to_string())?;
            if !meas_now[idx].is_empty() {
                let _ = measurement_update_graphic(
                    &mut self.navs[idx],
                    &meas_now[idx],
                    &self.constellation,
                    &atts_now[idx],
                );
            }
        }

        // Exchange measurements and attitude for the next tick's SDCP.
        for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
            let idx = sc.index();
            self.links[idx].send(
                CrosslinkPayload::Measurements(meas_now[idx].clone()),
                t,
                &mut self.rng_link,
            );
            self.links[idx].send(
                CrosslinkPayload::Attitude {
                    epoch: t,
                    body_to_eci: atts_now[idx],
                },
                t,
                &mut self.rng_link,
            );
            self.prev_meas[idx] = Some(meas_now[idx].clone());
            self.prev_atts[idx] = Some(atts_now[idx]);
        }

        // Integer resolution cadence.
        if (t as u64) % 10 == 0 {
            for sc in [SpacecraftId::Dsc, SpacecraftId::Osc] {
                let idx = sc.index();
                let result = resolve_integers(&mut self.navs[idx]);
                if sc == self.active {
                    if self.first_fix.is_some() {
                        self.iar_attempts_after_fix += 1;
                    }
                    if result.status == IarStatus::Fixed {
                        if self.first_fix.is_none() {
                            self.first_fix = Some(t);
                            self.telemetry.events.push(Event::IarFirstFix { t, owner: sc });
                        }
                        self.iar_fixed_count += 1;
                        // Wrong-fix bookkeeping against the truth integers,
                        // in the filter's own-minus-remote convention.
                        if let Some(pivot) = result.pivot {
                            let own = sc.index();
                            let rem = sc.other().index();
                            let truth_sd = |sat: u8| -> Option<i64> {
                                Some(
                                    self.channels[own].ambiguity(sat)?
                                        - self.channels[rem].ambiguity(sat)?,
                                )
                            };
                            if let Some(pivot_sd) = truth_sd(pivot) {
                                for (sat, dd) in &result.fixed {
                                    if let Some(sd) = truth_sd(*sat) {
                                        if sd - pivot_sd != *dd {
                                            self.wrong_fixes += 1;
                                            self.telemetry
                                                .events
                                                .push(Event::WrongFix { t, owner: sc });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        // Relative estimate from the active filter.
        let (est_roe, est_cov) =
            relative_output(&self.navs[self.active.index()]).map_err(|e| e.to_string())?;
        self.est_cache = Some((est_roe, est_cov, t));

        self.t = t;

        // Safety monitor.
        let mut events = ModeEvents::default();
        if (t as u64) % self.config.safety.check_period_s.max(1.0) as u64 == 0 {
            let verdict = check_passive_safety(
                &est_roe,
                &est_cov,
                &self.nav_chief(),
                &self.navs[self.active.index()].forces,
                Some((&ball[0], &ball[1])),
                &self.config.safety.safety(),
                t,
            )
            .map_err(|e| e.to_string())?;
            self.safety_checks += 1;
            self.min_safety_margin = self.min_safety_margin.min(verdict.min_margin);
            let action = self.monitor.step(Some(&verdict), 0.0);
            let escalated = action == MonitorAction::EscalateEscape;
            if escalated {
                self.escalations += 1;
                events.safety_escalation = true;
                self.telemetry.events.push(Event::SafetyEscalation {
                    t,
                    margin: verdict.min_margin,
                });
            }
            self.telemetry.record_safety(t, &verdict, escalated);
        }

        // Ground command script.
        if self.mode.mode == MissionMode::Standby
            && !self.campaign_done
            && (t - self.config.campaign.standby_wait_s).abs() < 0.5
        {
            events.ground_command = Some(crate::mission::GroundCommand::BeginScienceCampaign);
        }

        // Mode-specific control.
        self.run_control(&mut events, &est_roe, &est_cov)?;

        // Execute committed maneuvers falling due in (t, t+1].
        self.run_actuation(t)?;

        // Mode machine step.
        let before = self.mode.mode;
        let (next_mode, rejected) = mode_step(&self.mode, &events);
        for r in rejected {
            self.telemetry.events.push(Event::Fault { t, description: r });
        }
        if next_mode.mode != before {
            self.telemetry.events.push(Event::ModeTransition {
                t,
                from: before,
                to: next_mode.mode,
            });
            self.on_mode_change(before, next_mode.mode, next_mode.transfer_direction)?;
        }
        self.mode = next_mode;

        self.record_telemetry(&est_roe, &est_cov);
        Ok(())
    }

    fn on_mode_change(
        &mut self,
        from: MissionMode,
        to: MissionMode,
        direction: Option<TransferDirection>,
    ) -> Result<(), String> {
        match to {
            MissionMode::Transfer => {
                let (from_roe, to_roe): (RoeState, RoeState) = match direction {
                    Some(TransferDirection::ToScience) => {
                        let est = self.est_cache.as_ref().map(|e| e.0).unwrap_or_default();
                        (est, self.guidance.nominal_roe)
                    }
                    _ => {
                        let est = self.est_cache.as_ref().map(|e| e.0).unwrap_or_default();
                        (est, self.config.modes.standby.into())
                    }
                };
                let chief = self.nav_chief();
                // Waypoints are screened a few meters above the safety
                // floor so the coasting geometry between impulses keeps a
                // positive q-sigma margin.
                let transfer_config = TransferConfig {
                    step_ratio: self.config.control.transfer_step_ratio,
                    min_rn_separation: self.config.safety.min_separation_m + 3.0,
                    ..TransferConfig::default()
                };
                self.transfer_legs =
                    transfer_guidance(&from_roe, &to_roe, &chief, &transfer_config, self.t)
                        .map_err(|e| e.to_string())?;
                self.transfer_leg_planned = false;
            }
            MissionMode::Science => {
                self.science = None;
            }
            MissionMode::Escape => {
                self.escape_planned = false;
                // Drop any outstanding plan; escape overrides.
                self.committed.retain(|m| m.status == ManeuverStatus::Executed);
            }
            MissionMode::Standby => {
                self.last_stationkeeping = self.t;
                if from == MissionMode::Transfer && self.mode.observations_done > 0 {
                    self.campaign_done = true;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn run_control(
        &mut self,
        events: &mut ModeEvents,
        est_roe: &RoeState,
        est_cov: &Matrix6<f64>,
    ) -> Result<(), String> {
        let t = self.t;
        let chief = self.nav_chief();
        match self.mode.mode {
            MissionMode::Standby => {
                // Once per orbit: deadband check against the standby target.
                if t - self.last_stationkeeping >= self.period {
                    self.last_stationkeeping = t;
                    let target_roe: RoeState = self.config.modes.standby.into();
                    let de_err = (est_roe.dex - target_roe.dex)
                        .hypot(est_roe.dey - target_roe.dey);
                    let dl_err = (est_roe.dlambda - target_roe.dlambda).abs();
                    if de_err > self.config.control.de_deadband
                        || dl_err > self.config.control.dlambda_threshold
                    {
                        let target = ControlTarget::new(
                            target_roe,
                            t + 2.0 * self.period,
                            TargetKind::Stationkeeping,
                        );
                        if let Ok(plan) =
                            plan_closed_form(est_roe, &target, &chief, t, self.active)
                        {
                            self.commit_plan(plan)?;
                        }
                    }
                }
            }
            MissionMode::Transfer => {
                if self.transfer_legs.is_empty() {
                    events.transfer_complete = true;
                } else if !self.transfer_leg_planned {
                    let leg = self.transfer_legs[0];
                    if let Ok(plan) = plan_closed_form(est_roe, &leg, &chief, t, self.active) {
                        self.commit_plan(plan)?;
                        self.transfer_leg_planned = true;
                    } else {
                        // Horizon shaping: push the leg out by a quarter
                        // orbit and retry next tick.
                        self.transfer_legs[0].achieve_by += 0.25 * self.period;
                    }
                } else if t >= self.transfer_legs[0].achieve_by {
                    self.transfer_legs.remove(0);
                    self.transfer_leg_planned = false;
                    if self.transfer_legs.is_empty() {
                        events.transfer_complete = true;
                    }
                }
            }
            MissionMode::Science => {
                self.run_science(events, est_roe, est_cov, &chief)?;
            }
            MissionMode::Escape => {
                if !self.escape_planned {
                    let escape_config = EscapeConfig {
                        min_rn_separation: self.config.safety.min_separation_m.max(5.0),
                        nominal_da: self.config.control.escape_da,
                        ..EscapeConfig::default()
                    };
                    let earliest = self
                        .actuators[self.active.index()]
                        .last_execution
                        .map(|l| l + MANEUVER_SPACING_S)
                        .unwrap_or(t + COMMIT_LEAD_S)
                        .max(t + COMMIT_LEAD_S);
                    let (m, _flag) = plan_escape(
                        est_roe,
                        est_cov,
                        &chief,
                        &escape_config,
                        earliest,
                        self.active,
                    );
                    self.commit_plan(vec![m])?;
                    self.escape_planned = true;
                }
                // Escape complete once nothing is left to execute.
                if self.escape_planned
                    && self
                        .committed
                        .iter()
                        .all(|m| m.status == ManeuverStatus::Executed)
                {
                    events.escape_executed = true;
                }
            }
            MissionMode::Manual => {}
        }
        Ok(())
    }

    fn run_science(
        &mut self,
        events: &mut ModeEvents,
        est_roe: &RoeState,
        est_cov: &Matrix6<f64>,
        chief: &AbsoluteOrbit,
    ) -> Result<(), String> {
        let t = self.t;
        // Start a new observation cycle if needed.
        if self.science.is_none() {
            let t_obs = self.guidance.next_observation_epoch(chief, t + 600.0);
            let roe_at_obs = self.guidance.alignment_target(chief, t_obs);
            // Virtual target at the last-burn epoch: coast backwards.
            let t_hold = t_obs - SETTLE_MARGIN_S;
            let phi_back = stm_j2(chief, t_obs, t_hold);
            let target = ControlTarget::new(
                phi_back.apply(&roe_at_obs),
                t_hold,
                TargetKind::ScienceAlignment,
            );
            // Attitude windows for both spacecraft.
            self.attitude.push_window(PointingWindow {
                obs_start: t_obs,
                obs_end: t_obs + OBS_WINDOW_S,
                target: self.guidance.target_eci,
            });
            self.science = Some(ScienceCycle {
                t_obs,
                target,
                phase: SciencePhase::Far,
                last_replan_check: t,
                planned: false,
                samples: Vec::new(),
            });
        }

        let Some(mut cycle) = self.science.take() else {
            return Ok(());
        };

        let window_end = cycle.t_obs + OBS_WINDOW_S;
        let terminal_start = cycle.t_obs - self.config.control.terminal_window_s;

        // Phase transitions.
        let phase = if t >= cycle.t_obs {
            SciencePhase::Window
        } else if t >= terminal_start {
            SciencePhase::Terminal
        } else {
            SciencePhase::Far
        };
        let phase_changed = phase != cycle.phase;
        cycle.phase = phase;

        match phase {
            SciencePhase::Far => {
                let horizon = cycle.target.achieve_by - t;
                let in_domain =
                    horizon > 0.12 * self.period && horizon < 0.97 * self.period;
                let need_plan = !cycle.planned
                    || (t - cycle.last_replan_check >= self.config.control.replan_period_s
                        && {
                            cycle.last_replan_check = t;
                            mpc_replan_decision(
                                &self.committed_future(),
                                est_roe,
                                est_cov,
                                &cycle.target,
                                chief,
                                t,
                                self.config.forces.process_noise_per_orbit,
                            ) == ReplanDecision::Replan
                        });
                if in_domain && need_plan {
                    match plan_reachable_set_mpc(est_roe, &cycle.target, chief, t, self.active)
                    {
                        Ok(plan) => {
                            self.replace_plan(plan)?;
                            cycle.planned = true;
                        }
                        Err(_) => {
                            // Out-of-domain or solver trouble: wait for the
                            // terminal planner.
                        }
                    }
                }
            }
            SciencePhase::Terminal => {
                let replan_due = phase_changed
                    || t - cycle.last_replan_check >= 45.0;
                if replan_due && t + COMMIT_LEAD_S < cycle.target.achieve_by - 1.0 {
                    cycle.last_replan_check = t;
                    let decision = if phase_changed {
                        ReplanDecision::Replan
                    } else {
                        mpc_replan_decision(
                            &self.committed_future(),
                            est_roe,
                            est_cov,
                            &cycle.target,
                            chief,
                            t,
                            self.config.forces.process_noise_per_orbit,
                        )
                    };
                    if decision == ReplanDecision::Replan {
                        let t_last = cycle.target.achieve_by;
                        let t_mid = 0.5 * (t + COMMIT_LEAD_S + t_last);
                        let times = [t_mid, t_last];
                        if let Ok(plan) = plan_tikhonov(
                            est_roe,
                            &cycle.target,
                            chief,
                            t,
                            &times,
                            self.config.control.nu,
                            self.active,
                        ) {
                            self.replace_plan(plan)?;
                        }
                    }
                }
            }
            SciencePhase::Window => {
                // Collect truth samples through the window.
                cycle.samples.push(AlignmentSample {
                    t,
                    dsc: self.truth.dsc,
                    osc: self.truth.osc,
                    att_dsc: self.attitude.body_to_eci(t, &self.truth.dsc),
                    att_osc: self.attitude.body_to_eci(t, &self.truth.osc),
                });
                if t >= window_end {
                    let metrics = evaluate_alignment(
                        &cycle.samples,
                        &self.guidance.target_eci,
                        &self.geometry,
                    );
                    self.observation_index += 1;
                    self.observations.push(ObservationRecord {
                        index: self.observation_index,
                        epoch: cycle.t_obs,
                        metrics,
                    });
                    self.telemetry.events.push(Event::Observation {
                        t,
                        index: self.observation_index,
                        metrics,
                    });
                    events.observation_attempted = true;
                    self.science = None;
                    return Ok(());
                }
            }
        }

        self.science = Some(cycle);
        Ok(())
    }

    /// Future committed maneuvers (for replan decisions).
    fn committed_future(&self) -> Vec<Maneuver> {
        self.committed
            .iter()
            .filter(|m| m.status != ManeuverStatus::Executed && m.epoch > self.t)
            .copied()
            .collect()
    }

    /// Buffer a plan against the actuator envelope and commit it.
    fn commit_plan(&mut self, plan: Vec<Maneuver>) -> Result<(), String> {
        let chief = self.nav_chief();
        for m in plan {
            let mut m = m;
            if m.epoch < self.t + COMMIT_LEAD_S {
                m.epoch = self.t + COMMIT_LEAD_S;
            }
            let buffered = buffer_maneuver(&m, &chief, MAX_IMPULSE_DV, MANEUVER_SPACING_S)
                .map_err(|e| e.to_string())?;
            for mut b in buffered {
                b.status = ManeuverStatus::Committed;
                self.committed.push(b);
            }
        }
        self.committed.sort_by(|a, b| a.epoch.total_cmp(&b.epoch));
        Ok(())
    }

    /// Drop unexecuted committed maneuvers and install a fresh plan.
    fn replace_plan(&mut self, plan: Vec<Maneuver>) -> Result<(), String> {
        self.committed.retain(|m| m.status == ManeuverStatus::Executed);
        self.commit_plan(plan)
    }

    fn run_actuation(&mut self, t: f64) -> Result<(), String> {
        // Inhibit thrusting from settle start to window end.
        let inhibit: Option<(f64, f64)> = self.science.as_ref().map(|c| {
            (
                c.t_obs - SETTLE_MARGIN_S,
                c.t_obs + OBS_WINDOW_S,
            )
        });
        let mode = self.mode.mode;
        let label = self.mode_label();
        let mut executed_any = Vec::new();
        for m in &mut self.committed {
            if m.status == ManeuverStatus::Executed {
                continue;
            }
            if m.epoch <= t || m.epoch <= t + 1.0 {
                if let Some((a, b)) = inhibit {
                    if m.epoch >= a - 1.0 && m.epoch <= b {
                        m.epoch = b + 1.0;
                        continue;
                    }
                }
                if m.epoch > t + 1.0 {
                    continue;
                }
                let idx = m.actor.index();
                let mass = if m.actor == SpacecraftId::Dsc {
                    self.config.dsc.mass_kg
                } else {
                    self.config.osc.mass_kg
                };
                let outcome =
                    execute_maneuver(m, &self.config.actuator, &mut self.actuators[idx], mass, &mut self.rng_actuator);
                match outcome {
                    ExecutionOutcome::Executed(done) => {
                        *m = done;
                        executed_any.push(done);
                    }
                    ExecutionOutcome::Deferred => {
                        m.epoch = self.actuators[idx]
                            .last_execution
                            .map(|l| l + MANEUVER_SPACING_S)
                            .unwrap_or(t + 1.0)
                            .max(t + 1.0);
                    }
                    ExecutionOutcome::TankEmpty => {
                        self.telemetry.events.push(Event::Fault {
                            t,
                            description: format!("{} tank empty", m.actor),
                        });
                        m.status = ManeuverStatus::Executed;
                        m.executed_dv = Some(Vector3::zeros());
                    }
                }
            }
        }
        for done in executed_any {
            let dv = done.executed_dv.unwrap_or_default();
            self.pending_burns.push(ImpulsiveBurn {
                epoch: done.epoch.max(t),
                dv_rtn: dv,
                actor: done.actor,
            });
            // The filters learn of the burn at execution: the commanding
            // spacecraft immediately, the remote through the crosslink
            // notice (commanded value either way; execution errors fall to
            // the filter process noise).
            let knowledge = ImpulsiveBurn {
                epoch: done.epoch.max(t),
                dv_rtn: done.dv_rtn,
                actor: done.actor,
            };
            self.known_burns[done.actor.index()].push(knowledge);
            self.links[done.actor.index()].send(
                CrosslinkPayload::ManeuverNotice(done),
                t,
                &mut self.rng_link,
            );
            let l1: f64 = dv.iter().map(|v| v.abs()).sum();
            *self.dv_by_mode.entry(label.clone()).or_insert(0.0) += l1;
            self.telemetry.record_maneuver(&done, mode);
        }
        // Keep the executed log short.
        let horizon = t - 2.0 * self.period;
        self.committed
            .retain(|m| m.status != ManeuverStatus::Executed || m.epoch > horizon);
        Ok(())
    }

    fn record_telemetry(&mut self, est_roe: &RoeState, est_cov: &Matrix6<f64>) {
        let t = self.t;
        let truth_roe = self.truth_roe();
        let chief = self.truth_chief_elements();
        let u = chief.mean_arg_latitude();
        let est_rtn = rtn_from_roe(&chief, est_roe, u);
        let truth_rtn = rtn_from_roe(&chief, &truth_roe, u);
        let pos_err = (est_rtn.position() - truth_rtn.position()).norm();
        let vel_err = (est_rtn.velocity() - truth_rtn.velocity()).norm();
        let abs_err = (self.navs[self.active.index()].position(SpacecraftId::Dsc)
            - self.truth.dsc.r)
            .norm();
        self.nav_err_window.push((t, pos_err, vel_err));

        if (t as u64) % self.config.telemetry_stride_s.max(1.0) as u64 == 0 {
            let iar = if self.navs[self.active.index()].iar_fixed {
                IarStatus::Fixed
            } else {
                IarStatus::Float
            };
            self.telemetry.states.push(StateRow {
                epoch: t,
                mode: self.mode.mode,
                truth_roe: [
                    truth_roe.da,
                    truth_roe.dlambda,
                    truth_roe.dex,
                    truth_roe.dey,
                    truth_roe.dix,
                    truth_roe.diy,
                ],
                est_roe: [
                    est_roe.da,
                    est_roe.dlambda,
                    est_roe.dex,
                    est_roe.dey,
                    est_roe.dix,
                    est_roe.diy,
                ],
                est_sigma: [
                    est_cov[(0, 0)].max(0.0).sqrt(),
                    est_cov[(1, 1)].max(0.0).sqrt(),
                    est_cov[(2, 2)].max(0.0).sqrt(),
                    est_cov[(3, 3)].max(0.0).sqrt(),
                    est_cov[(4, 4)].max(0.0).sqrt(),
                    est_cov[(5, 5)].max(0.0).sqrt(),
                ],
                rel_pos_err_m: pos_err,
                rel_vel_err_ms: vel_err,
                abs_pos_err_m: abs_err,
                iar,
                min_rn_geometric: crate::safety::ei_separation_min_rn(&truth_roe),
            });
        }
    }

    /// Run the campaign to completion (or the duration cap) and build the
    /// report.
    pub fn run(mut self) -> Result<(RunReport, Telemetry), String> {
        let start = std::time::Instant::now();
        let max_t = self.config.campaign.max_duration_orbits * self.period;
        let mut end_tail: Option<f64> = None;
        while self.t < max_t {
            self.step()?;
            if self.campaign_done && end_tail.is_none() {
                end_tail = Some(self.t + 300.0);
            }
            if let Some(tail) = end_tail {
                if self.t >= tail {
                    break;
                }
            }
            if self.mode.mode == MissionMode::Manual && self.escape_planned {
                // Post-escape manual: coast briefly then stop.
                break;
            }
        }

        // Navigation statistics over the converged portion (second half of
        // the pre-science standby or everything after 0.5 orbits).
        let conv_start = 0.5 * self.period;
        let rel: Vec<&(f64, f64, f64)> = self
            .nav_err_window
            .iter()
            .filter(|(t, _, _)| *t > conv_start)
            .collect();
        let rms = |sel: &dyn Fn(&(f64, f64, f64)) -> f64| -> f64 {
            if rel.is_empty() {
                return f64::NAN;
            }
            (rel.iter().map(|r| sel(r).powi(2)).sum::<f64>() / rel.len() as f64).sqrt()
        };
        let nav = NavReport {
            rel_pos_rms_m: rms(&|r| r.1),
            rel_vel_rms_ms: rms(&|r| r.2),
            abs_pos_rms_m: {
                let abs_err = (self.navs[self.active.index()]
                    .position(SpacecraftId::Dsc)
                    - self.truth.dsc.r)
                    .norm();
                abs_err
            },
            first_fix_epoch: self.first_fix,
            iar_availability: if self.iar_attempts_after_fix > 0 {
                // The fix that started the streak is counted in neither.
                (self.iar_fixed_count.saturating_sub(1)) as f64
                    / self.iar_attempts_after_fix as f64
            } else {
                0.0
            },
            wrong_fix_rate: if self.iar_fixed_count > 0 {
                self.wrong_fixes as f64 / self.iar_fixed_count as f64
            } else {
                0.0
            },
        };

        let attempts = self.observations.len();
        let successes = self
            .observations
            .iter()
            .filter(|o| o.metrics.success)
            .count();
        let dv_total: f64 = self.dv_by_mode.values().sum();
        let science_dv = self.dv_by_mode.get("science").copied().unwrap_or(0.0);

        let report = RunReport {
            scenario: self.config.name.clone(),
            master_seed: self.config.master_seed,
            run_index: self.seed_tree.run_index,
            duration_s: self.t,
            duration_orbits: self.t / self.period,
            success_rate: if attempts > 0 {
                successes as f64 / attempts as f64
            } else {
                0.0
            },
            observations: self.observations,
            dv_by_mode: self.dv_by_mode,
            dv_total,
            dv_science_per_observation: if attempts > 0 {
                science_dv / attempts as f64
            } else {
                0.0
            },
            nav,
            safety: SafetyReport {
                checks: self.safety_checks,
                escalations: self.escalations,
                min_margin_m: self.min_safety_margin,
            },
            campaign_complete: self.campaign_done,
            wall_clock_s: start.elapsed().as_secs_f64(),
        };
        Ok((report, self.telemetry))
    }
}

/// Run one scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(RunReport, Telemetry), String> {
    run_scenario_indexed(config, 0)
}

/// Run one scenario with a Monte-Carlo run index folded into the seeds.
pub fn run_scenario_indexed(
    config: &ScenarioConfig,
    run_index: u64,
) -> Result<(RunReport, Telemetry), String> {
    Simulation::new(config.clone(), run_index)?.run()
}
