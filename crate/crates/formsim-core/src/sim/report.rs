use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::mission::AlignmentMetrics;

/// Navigation performance aggregates over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NavReport {
    /// 3D RMS of the relative position error after convergence [m].
    pub rel_pos_rms_m: f64,
    /// 3D RMS of the relative velocity error after convergence [m/s].
    pub rel_vel_rms_ms: f64,
    /// 3D RMS of the chief absolute position error after convergence [m].
    pub abs_pos_rms_m: f64,
    /// Epoch of the first successful integer fix [s].
    pub first_fix_epoch: Option<f64>,
    /// Fraction of resolution attempts that fixed, after the first fix.
    pub iar_availability: f64,
    /// Fraction of fixes that disagreed with the truth integers.
    pub wrong_fix_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SafetyReport {
    pub checks: usize,
    pub escalations: usize,
    pub min_margin_m: f64,
}

/// Full single-run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunReport {
    pub scenario: String,
    pub master_seed: u64,
    pub run_index: u64,
    pub duration_s: f64,
    pub duration_orbits: f64,
    pub observations: Vec<ObservationRecord>,
    pub success_rate: f64,
    /// L1 delta-v by mode label, thruster frame [m/s].
    pub dv_by_mode: BTreeMap<String, f64>,
    pub dv_total: f64,
    /// Science-mode delta-v per observation attempt [m/s].
    pub dv_science_per_observation: f64,
    pub nav: NavReport,
    pub safety: SafetyReport,
    pub campaign_complete: bool,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub index: u32,
    pub epoch: f64,
    pub metrics: AlignmentMetrics,
}

impl RunReport {
    pub fn successes(&self) -> usize {
        self.observations.iter().filter(|o| o.metrics.success).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "index,epoch,pointing_offset_m,lateral_velocity_ms,focus_error_m,success\n",
        );
        for o in &self.observations {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{}\n",
                o.index,
                o.epoch,
                o.metrics.pointing_offset,
                o.metrics.lateral_velocity,
                o.metrics.focus_error,
                o.metrics.success
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# Run report: {} (seed {}, run {})\n\n",
            self.scenario, self.master_seed, self.run_index
        ));
        out.push_str(&format!(
            "- Duration: {:.1} s ({:.2} orbits), campaign complete: {}\n",
            self.duration_s, self.duration_orbits, self.campaign_complete
        ));
        out.push_str(&format!(
            "- Observations: {} attempts, {} successes ({:.0}%)\n",
            self.observations.len(),
            self.successes(),
            100.0 * self.success_rate
        ));
        out.push_str(&format!(
            "- Navigation: rel pos RMS {:.4} m, rel vel RMS {:.2e} m/s, abs pos RMS {:.2} m\n",
            self.nav.rel_pos_rms_m, self.nav.rel_vel_rms_ms, self.nav.abs_pos_rms_m
        ));
        out.push_str(&format!(
            "- IAR: first fix at {:?} s, availability {:.2}%, wrong-fix rate {:.4}%\n",
            self.nav.first_fix_epoch,
            100.0 * self.nav.iar_availability,
            100.0 * self.nav.wrong_fix_rate
        ));
        out.push_str(&format!(
            "- Safety: {} checks, {} escalations, min margin {:.2} m\n\n",
            self.safety.checks, self.safety.escalations, self.safety.min_margin_m
        ));
        out.push_str("## Delta-v ledger (L1, thruster frame)\n\n");
        out.push_str("| mode | delta-v [m/s] |\n|---|---|\n");
        for (mode, dv) in &self.dv_by_mode {
            out.push_str(&format!("| {mode} | {dv:.4} |\n"));
        }
        out.push_str(&format!("| total | {:.4} |\n", self.dv_total));
        out.push_str(&format!(
            "| science per observation | {:.4} |\n",
            self.dv_science_per_observation
        ));
        out
    }
}

/// Aggregate over a Monte-Carlo batch (one sweep value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub runs: usize,
    pub attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Lateral alignment error quartiles over all attempts [m].
    pub lateral_error_quartiles: [f64; 3],
    pub dv_total_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MonteCarloReport {
    pub scenario: String,
    pub parameter: String,
    pub points: Vec<SweepPoint>,
    pub wall_clock_s: f64,
}

impl MonteCarloReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "parameter,value,runs,attempts,successes,success_rate,lat_q25,lat_q50,lat_q75,dv_total_mean\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{:?},{},{},{},{:?},{:?},{:?},{:?},{:?}\n",
                p.parameter,
                p.value,
                p.runs,
                p.attempts,
                p.successes,
                p.success_rate,
                p.lateral_error_quartiles[0],
                p.lateral_error_quartiles[1],
                p.lateral_error_quartiles[2],
                p.dv_total_mean
            ));
        }
        out
    }
}
