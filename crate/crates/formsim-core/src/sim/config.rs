use serde::{Deserialize, Serialize};

use crate::astro::{AbsoluteOrbit, AstroError, RoeState};
use crate::consts::R_EARTH;
use crate::dynamics::{
    density_mean_activity, density_solar_max, BallisticProperties, DragModel, ForceModelConfig,
    Geopotential, SrpModel, ThirdBodyModel,
};
use crate::gnss::KlobucharModel;
use crate::mission::ActuatorModel;
use crate::nav::NavConfig;
use crate::safety::{SafetyConfig, SafetyPlane};

/// Reference orbit parameters (sun-synchronous test case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub altitude_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    pub mean_arg_lat_deg: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            altitude_km: 500.0,
            eccentricity: 0.004,
            inclination_deg: 97.8,
            raan_deg: 157.5,
            arg_perigee_deg: 0.0,
            mean_arg_lat_deg: 0.0,
        }
    }
}

impl OrbitConfig {
    pub fn orbit(&self) -> Result<AbsoluteOrbit, AstroError> {
        AbsoluteOrbit::new(
            R_EARTH + self.altitude_km * 1e3,
            self.eccentricity,
            self.inclination_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.arg_perigee_deg.to_radians(),
            (self.mean_arg_lat_deg - self.arg_perigee_deg).to_radians(),
            0.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoeConfig {
    pub da: f64,
    pub dlambda: f64,
    pub dex: f64,
    pub dey: f64,
    pub dix: f64,
    pub diy: f64,
}

impl Default for RoeConfig {
    fn default() -> Self {
        RoeConfig {
            da: 0.0,
            dlambda: 0.0,
            dex: 0.0,
            dey: 0.0,
            dix: 0.0,
            diy: 0.0,
        }
    }
}

impl From<RoeConfig> for RoeState {
    fn from(c: RoeConfig) -> RoeState {
        RoeState::new(c.da, c.dlambda, c.dex, c.dey, c.dix, c.diy)
    }
}

/// The two mode geometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModesConfig {
    pub standby: RoeConfig,
    pub science: RoeConfig,
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig {
            standby: RoeConfig {
                dey: 200.0,
                diy: 200.0,
                ..RoeConfig::default()
            },
            science: RoeConfig {
                da: -2.62,
                dlambda: 45.21,
                dex: -34.51,
                dey: 4.78,
                dix: -18.72,
                diy: 2.72,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpacecraftConfig {
    pub mass_kg: f64,
    pub drag_coeff: f64,
    pub srp_coeff: f64,
    pub cross_section_m2: f64,
    pub propellant_kg: f64,
}

impl Default for SpacecraftConfig {
    fn default() -> Self {
        SpacecraftConfig {
            mass_kg: 11.35,
            drag_coeff: 2.2,
            srp_coeff: 1.8,
            cross_section_m2: 0.25,
            propellant_kg: 0.4,
        }
    }
}

impl SpacecraftConfig {
    pub fn ballistic(&self) -> BallisticProperties {
        BallisticProperties {
            mass: self.mass_kg,
            cd: self.drag_coeff,
            cr: self.srp_coeff,
            area: self.cross_section_m2,
        }
    }
}

/// Density preset selector for the force models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityPreset {
    Off,
    MeanActivity,
    SolarMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForcesConfig {
    pub truth_drag: DensityPreset,
    pub onboard_drag: DensityPreset,
    pub srp: bool,
    pub third_body: bool,
    pub process_noise_per_orbit: f64,
}

impl Default for ForcesConfig {
    fn default() -> Self {
        ForcesConfig {
            truth_drag: DensityPreset::SolarMax,
            onboard_drag: DensityPreset::MeanActivity,
            srp: false,
            third_body: false,
            process_noise_per_orbit: 1.0,
        }
    }
}

impl ForcesConfig {
    fn drag_of(preset: DensityPreset) -> DragModel {
        match preset {
            DensityPreset::Off => DragModel::Off,
            DensityPreset::MeanActivity => density_mean_activity(),
            DensityPreset::SolarMax => density_solar_max(),
        }
    }

    pub fn truth(&self) -> ForceModelConfig {
        ForceModelConfig {
            geopotential: Geopotential::J2,
            drag: Self::drag_of(self.truth_drag),
            srp: if self.srp { SrpModel::Cannonball } else { SrpModel::Off },
            third_body: if self.third_body {
                ThirdBodyModel::AnalyticLunisolar
            } else {
                ThirdBodyModel::Off
            },
            process_noise_per_orbit: self.process_noise_per_orbit,
        }
    }

    pub fn onboard(&self) -> ForceModelConfig {
        ForceModelConfig {
            geopotential: Geopotential::J2,
            drag: Self::drag_of(self.onboard_drag),
            srp: SrpModel::Off,
            third_body: ThirdBodyModel::Off,
            process_noise_per_orbit: self.process_noise_per_orbit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnssConfig {
    pub satellite_count: usize,
    /// Broadcast ephemeris corruption per ROE component, 1-sigma [m].
    pub ephemeris_roe_sigma: f64,
    /// Broadcast clock bias 1-sigma [m].
    pub clock_bias_sigma: f64,
    pub pseudorange_noise: f64,
    pub carrier_noise: f64,
    pub iono_enabled: bool,
    pub cycle_slip_probability: f64,
}

impl Default for GnssConfig {
    fn default() -> Self {
        GnssConfig {
            satellite_count: 28,
            ephemeris_roe_sigma: 1.0,
            clock_bias_sigma: 0.5,
            pseudorange_noise: 0.20,
            carrier_noise: 0.002,
            iono_enabled: true,
            cycle_slip_probability: 0.0,
        }
    }
}

impl GnssConfig {
    pub fn measurement_config(&self) -> crate::gnss::MeasurementConfig {
        crate::gnss::MeasurementConfig {
            pseudorange_noise: self.pseudorange_noise,
            carrier_noise: self.carrier_noise,
            iono: if self.iono_enabled {
                Some(KlobucharModel::default())
            } else {
                None
            },
            cycle_slip_probability: self.cycle_slip_probability,
        }
    }
}

/// Internal geometry error realizations (1-sigma inputs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Center-of-mass knowledge error, per axis 1-sigma [m].
    pub com_sigma: f64,
    /// Payload mounting position error, per axis 1-sigma [m].
    pub mount_position_sigma: f64,
    /// Antenna phase-center offset 1-sigma along the boresight [m].
    pub phase_center_sigma: f64,
    /// Mounting direction error 1-sigma [rad].
    pub mount_direction_sigma: f64,
    /// Detector aperture center in the DSC body frame [m].
    pub detector_body: [f64; 3],
    /// Sieve pattern center in the OSC body frame [m].
    pub sieve_body: [f64; 3],
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            com_sigma: 0.005,
            mount_position_sigma: 0.0005,
            phase_center_sigma: 0.0854,
            mount_direction_sigma: 30.0 / 3600.0 * std::f64::consts::PI / 180.0,
            detector_body: [0.15, 0.0, 0.0],
            sieve_body: [-0.15, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Station-keeping relative-eccentricity deadband radius [m].
    pub de_deadband: f64,
    /// Station-keeping dlambda threshold [m].
    pub dlambda_threshold: f64,
    /// Tikhonov regularization.
    pub nu: f64,
    /// Terminal planner engage time before observation [s].
    pub terminal_window_s: f64,
    /// MPC replan evaluation cadence in science mode [s].
    pub replan_period_s: f64,
    /// Transfer per-step e/i shrink ratio.
    pub transfer_step_ratio: f64,
    /// Escape drift target da [m].
    pub escape_da: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            de_deadband: 5.0,
            dlambda_threshold: 10.0,
            nu: 1e-8,
            terminal_window_s: 900.0,
            replan_period_s: 60.0,
            transfer_step_ratio: 0.8,
            escape_da: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrosslinkConfig {
    pub latency_s: f64,
    pub drop_probability: f64,
}

impl Default for CrosslinkConfig {
    fn default() -> Self {
        CrosslinkConfig {
            latency_s: 0.5,
            drop_probability: 0.0,
        }
    }
}

/// Campaign shape: standby wait, transfer, N observations, transfer back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub observations: u32,
    pub standby_wait_s: f64,
    /// Hard cap on the simulated duration [orbits].
    pub max_duration_orbits: f64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            observations: 10,
            standby_wait_s: 2700.0,
            max_duration_orbits: 45.0,
        }
    }
}

/// Safety engine configuration in file form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyFileConfig {
    pub horizon_hours: f64,
    pub plane: SafetyPlane,
    pub min_separation_m: f64,
    pub confidence_q: f64,
    pub check_period_s: f64,
    pub sample_step_s: f64,
}

impl Default for SafetyFileConfig {
    fn default() -> Self {
        SafetyFileConfig {
            horizon_hours: 1.5,
            plane: SafetyPlane::Rn,
            min_separation_m: 5.0,
            confidence_q: 3.0,
            check_period_s: 10.0,
            sample_step_s: 30.0,
        }
    }
}

impl SafetyFileConfig {
    pub fn safety(&self) -> SafetyConfig {
        SafetyConfig {
            horizon_s: self.horizon_hours * 3600.0,
            plane: self.plane,
            min_separation: self.min_separation_m,
            confidence_q: self.confidence_q,
            check_period_s: self.check_period_s,
            sample_step_s: self.sample_step_s,
        }
    }
}

/// Top-level scenario configuration; TOML-serializable, defaults reproduce
/// the reference test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub master_seed: u64,
    pub orbit: OrbitConfig,
    pub modes: ModesConfig,
    pub campaign: CampaignConfig,
    pub dsc: SpacecraftConfig,
    pub osc: SpacecraftConfig,
    pub forces: ForcesConfig,
    pub gnss: GnssConfig,
    pub geometry: GeometryConfig,
    pub nav: NavConfig,
    pub control: ControlConfig,
    pub actuator: ActuatorModel,
    pub safety: SafetyFileConfig,
    pub crosslink: CrosslinkConfig,
    /// Telemetry output stride [s]; state rows are emitted this often.
    pub telemetry_stride_s: f64,
}

impl ScenarioConfig {
    pub fn table5() -> Self {
        ScenarioConfig {
            name: "reference-campaign".into(),
            master_seed: 1,
            osc: SpacecraftConfig {
                mass_kg: 10.62,
                cross_section_m2: 0.22,
                ..SpacecraftConfig::default()
            },
            telemetry_stride_s: 30.0,
            ..ScenarioConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.orbit.orbit().map_err(|e| e.to_string())?;
        if self.campaign.observations == 0 {
            return Err("campaign.observations must be >= 1".into());
        }
        if self.campaign.max_duration_orbits <= 0.0 {
            return Err("campaign.max_duration_orbits must be > 0".into());
        }
        self.dsc.ballistic().validate()?;
        self.osc.ballistic().validate()?;
        self.actuator.validate()?;
        self.safety.safety().validate()?;
        if self.gnss.satellite_count < 8 {
            return Err("gnss.satellite_count must be >= 8".into());
        }
        if !(0.0..=1.0).contains(&self.crosslink.drop_probability) {
            return Err("crosslink.drop_probability must lie in [0, 1]".into());
        }
        if self.geometry.com_sigma < 0.0
            || self.geometry.mount_position_sigma < 0.0
            || self.geometry.phase_center_sigma < 0.0
        {
            return Err("geometry sigmas must be >= 0".into());
        }
        if self.telemetry_stride_s <= 0.0 {
            return Err("telemetry_stride_s must be > 0".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    /// Apply a dotted-path override (Monte-Carlo sweep hook). Supported
    /// paths are the swept uncertainty knobs.
    pub fn apply_override(&mut self, path: &str, value: f64) -> Result<(), String> {
        match path {
            "geometry.com_sigma" => self.geometry.com_sigma = value,
            "geometry.mount_position_sigma" => self.geometry.mount_position_sigma = value,
            "geometry.phase_center_sigma" => self.geometry.phase_center_sigma = value,
            "actuator.magnitude_error" => self.actuator.magnitude_error = value,
            "actuator.direction_error_deg" => {
                self.actuator.direction_error = value.to_radians()
            }
            "gnss.pseudorange_noise" => self.gnss.pseudorange_noise = value,
            "gnss.carrier_noise" => self.gnss.carrier_noise = value,
            "gnss.cycle_slip_probability" => self.gnss.cycle_slip_probability = value,
            "crosslink.drop_probability" => self.crosslink.drop_probability = value,
            "campaign.observations" => self.campaign.observations = value as u32,
            "nav.dmc_tau" => self.nav.dmc_tau = value,
            "control.escape_da" => self.control.escape_da = value,
            other => return Err(format!("unsupported sweep path: {other}")),
        }
        self.validate()
    }
}
