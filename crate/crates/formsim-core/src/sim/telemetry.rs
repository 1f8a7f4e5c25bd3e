use serde::{Deserialize, Serialize};

use crate::control::{Maneuver, PlannerId};
use crate::mission::{AlignmentMetrics, MissionMode};
use crate::nav::IarStatus;
use crate::safety::SafetyVerdict;
use crate::types::SpacecraftId;

/// Downsampled formation state row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub epoch: f64,
    pub mode: MissionMode,
    pub truth_roe: [f64; 6],
    pub est_roe: [f64; 6],
    pub est_sigma: [f64; 6],
    pub rel_pos_err_m: f64,
    pub rel_vel_err_ms: f64,
    pub abs_pos_err_m: f64,
    pub iar: IarStatus,
    pub min_rn_geometric: f64,
}

/// One maneuver-log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverRow {
    pub epoch: f64,
    pub actor: SpacecraftId,
    pub planner: PlannerId,
    pub commanded_rtn: [f64; 3],
    pub executed_rtn: Option<[f64; 3]>,
    pub mode: MissionMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyRow {
    pub epoch: f64,
    pub safe: bool,
    pub min_margin: f64,
    pub time_of_closest_approach: f64,
    pub escalated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ModeTransition {
        t: f64,
        from: MissionMode,
        to: MissionMode,
    },
    Observation {
        t: f64,
        index: u32,
        metrics: AlignmentMetrics,
    },
    SafetyEscalation {
        t: f64,
        margin: f64,
    },
    IarFirstFix {
        t: f64,
        owner: SpacecraftId,
    },
    WrongFix {
        t: f64,
        owner: SpacecraftId,
    },
    Fault {
        t: f64,
        description: String,
    },
}

/// In-memory telemetry store; serialized to CSV / JSON lines on demand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Telemetry {
    pub states: Vec<StateRow>,
    pub maneuvers: Vec<ManeuverRow>,
    pub safety: Vec<SafetyRow>,
    pub events: Vec<Event>,
}

fn fmt(v: f64) -> String {
    // Shortest round-trip float formatting keeps output bit-faithful.
    format!("{v:?}")
}

impl Telemetry {
    pub fn states_csv(&self) -> String {
        let mut out = String::from(
            "epoch,mode,truth_da,truth_dlambda,truth_dex,truth_dey,truth_dix,truth_diy,\
             est_da,est_dlambda,est_dex,est_dey,est_dix,est_diy,\
             sig_da,sig_dlambda,sig_dex,sig_dey,sig_dix,sig_diy,\
             rel_pos_err_m,rel_vel_err_ms,abs_pos_err_m,iar,min_rn_geometric\n",
        );
        for r in &self.states {
            out.push_str(&fmt(r.epoch));
            out.push_str(&format!(",{:?}", r.mode));
            for v in r.truth_roe.iter().chain(&r.est_roe).chain(&r.est_sigma) {
                out.push(',');
                out.push_str(&fmt(*v));
            }
            out.push_str(&format!(
                ",{},{},{},{:?},{}\n",
                fmt(r.rel_pos_err_m),
                fmt(r.rel_vel_err_ms),
                fmt(r.abs_pos_err_m),
                r.iar,
                fmt(r.min_rn_geometric)
            ));
        }
        out
    }

    pub fn maneuvers_csv(&self) -> String {
        let mut out =
            String::from("epoch,actor,planner,cmd_r,cmd_t,cmd_n,exec_r,exec_t,exec_n,mode\n");
        for r in &self.maneuvers {
            let exec = r.executed_rtn.unwrap_or([f64::NAN; 3]);
            out.push_str(&format!(
                "{},{},{:?},{},{},{},{},{},{},{:?}\n",
                fmt(r.epoch),
                r.actor,
                r.planner,
                fmt(r.commanded_rtn[0]),
                fmt(r.commanded_rtn[1]),
                fmt(r.commanded_rtn[2]),
                fmt(exec[0]),
                fmt(exec[1]),
                fmt(exec[2]),
                r.mode,
            ));
        }
        out
    }

    pub fn safety_csv(&self) -> String {
        let mut out = String::from("epoch,safe,min_margin,tca,escalated\n");
        for r in &self.safety {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(r.epoch),
                r.safe,
                fmt(r.min_margin),
                fmt(r.time_of_closest_approach),
                r.escalated
            ));
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn record_safety(&mut self, epoch: f64, verdict: &SafetyVerdict, escalated: bool) {
        self.safety.push(SafetyRow {
            epoch,
            safe: verdict.safe,
            min_margin: verdict.min_margin,
            time_of_closest_approach: verdict.time_of_closest_approach,
            escalated,
        });
    }

    pub fn record_maneuver(&mut self, m: &Maneuver, mode: MissionMode) {
        self.maneuvers.push(ManeuverRow {
            epoch: m.epoch,
            actor: m.actor,
            planner: m.planner,
            commanded_rtn: [m.dv_rtn.x, m.dv_rtn.y, m.dv_rtn.z],
            executed_rtn: m.executed_dv.map(|d| [d.x, d.y, d.z]),
            mode,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_match_row_width() {
        let mut t = Telemetry::default();
        t.states.push(StateRow {
            epoch: 1.0,
            mode: MissionMode::Standby,
            truth_roe: [0.0; 6],
            est_roe: [0.0; 6],
            est_sigma: [0.0; 6],
            rel_pos_err_m: 0.0,
            rel_vel_err_ms: 0.0,
            abs_pos_err_m: 0.0,
            iar: IarStatus::Float,
            min_rn_geometric: 200.0,
        });
        let csv = t.states_csv();
        let mut lines = csv.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        let row_cols = lines.next().unwrap().split(',').count();
        assert_eq!(header_cols, row_cols);
    }

    #[test]
    fn events_serialize_as_json_lines() {
        let mut t = Telemetry::default();
        t.events.push(Event::ModeTransition {
            t: 5.0,
            from: MissionMode::Manual,
            to: MissionMode::Standby,
        });
        let line = t.events_jsonl();
        assert!(line.contains("\"event\":\"mode_transition\""));
        let parsed: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed["t"], 5.0);
    }
}
