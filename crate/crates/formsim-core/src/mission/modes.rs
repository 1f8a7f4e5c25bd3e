use serde::{Deserialize, Serialize};

/// The five mission modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionMode {
    Manual,
    Standby,
    Science,
    Transfer,
    Escape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferDirection {
    ToScience,
    ToStandby,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundCommand {
    /// Manual -> Standby.
    EnterStandby,
    /// Standby -> Transfer (to science).
    BeginScienceCampaign,
}

/// Fault classes routed through the FDIR mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdirFault {
    GncFault,
    NonGncFault,
    SafetyViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdirResponse {
    RoleSwitch,
    TransferToStandby,
    Escape,
}

/// Mode machine state: the mode plus its sub-state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub mode: MissionMode,
    pub transfer_direction: Option<TransferDirection>,
    pub observations_done: u32,
    pub observations_commanded: u32,
}

impl ModeState {
    pub fn new(observations_commanded: u32) -> Self {
        ModeState {
            mode: MissionMode::Manual,
            transfer_direction: None,
            observations_done: 0,
            observations_commanded,
        }
    }
}

/// One batch of events for a mode step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeEvents {
    pub ground_command: Option<GroundCommand>,
    /// Transfer reconfiguration reached its final waypoint.
    pub transfer_complete: bool,
    /// One observation attempt finished (success or not).
    pub observation_attempted: bool,
    /// Safety monitor escalated an escape.
    pub safety_escalation: bool,
    /// The escape maneuver was executed.
    pub escape_executed: bool,
    pub fdir: Option<FdirResponse>,
}

/// Apply one event batch. Returns the next state and a list of rejected
/// (undefined) edges for fault telemetry.
pub fn mode_step(state: &ModeState, events: &ModeEvents) -> (ModeState, Vec<String>) {
    let mut next = *state;
    let mut rejected = Vec::new();

    // Escape preempts everything.
    if events.safety_escalation || events.fdir == Some(FdirResponse::Escape) {
        if next.mode != MissionMode::Escape {
            next.mode = MissionMode::Escape;
            next.transfer_direction = None;
        }
        return (next, rejected);
    }

    // FDIR transfer-to-standby preempts nominal transitions.
    if events.fdir == Some(FdirResponse::TransferToStandby)
        && matches!(next.mode, MissionMode::Science | MissionMode::Transfer)
    {
        next.mode = MissionMode::Transfer;
        next.transfer_direction = Some(TransferDirection::ToStandby);
        return (next, rejected);
    }

    match next.mode {
        MissionMode::Manual => {
            if let Some(cmd) = events.ground_command {
                match cmd {
                    GroundCommand::EnterStandby => next.mode = MissionMode::Standby,
                    GroundCommand::BeginScienceCampaign => {
                        rejected.push("begin_science_campaign in manual".into())
                    }
                }
            }
        }
        MissionMode::Standby => {
            if let Some(cmd) = events.ground_command {
                match cmd {
                    GroundCommand::BeginScienceCampaign => {
                        next.mode = MissionMode::Transfer;
                        next.transfer_direction = Some(TransferDirection::ToScience);
                        next.observations_done = 0;
                    }
                    GroundCommand::EnterStandby => {
                        rejected.push("enter_standby in standby".into())
                    }
                }
            }
        }
        MissionMode::Transfer => {
            if events.ground_command.is_some() {
                rejected.push("ground command during transfer".into());
            }
            if events.transfer_complete {
                match next.transfer_direction {
                    Some(TransferDirection::ToScience) => {
                        next.mode = MissionMode::Science;
                        next.transfer_direction = None;
                    }
                    Some(TransferDirection::ToStandby) | None => {
                        next.mode = MissionMode::Standby;
                        next.transfer_direction = None;
                    }
                }
            }
        }
        MissionMode::Science => {
            if events.ground_command.is_some() {
                rejected.push("ground command during science".into());
            }
            if events.observation_attempted {
                next.observations_done += 1;
                if next.observations_done >= next.observations_commanded {
                    next.mode = MissionMode::Transfer;
                    next.transfer_direction = Some(TransferDirection::ToStandby);
                }
            }
        }
        MissionMode::Escape => {
            if events.ground_command.is_some() {
                rejected.push("ground command during escape".into());
            }
            if events.escape_executed {
                next.mode = MissionMode::Manual;
                next.transfer_direction = None;
            }
        }
    }
    (next, rejected)
}

/// FDIR response mapping: GNC faults switch roles, non-GNC faults switch
/// roles unless the formation is in science or transfer (then retreat to
/// standby), passive-safety violations escape.
pub fn fdir_respond(fault: FdirFault, mode: MissionMode) -> FdirResponse {
    match fault {
        FdirFault::GncFault => FdirResponse::RoleSwitch,
        FdirFault::NonGncFault => {
            if matches!(mode, MissionMode::Science | MissionMode::Transfer) {
                FdirResponse::TransferToStandby
            } else {
                FdirResponse::RoleSwitch
            }
        }
        FdirFault::SafetyViolation => FdirResponse::Escape,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn science_state() -> ModeState {
        ModeState {
            mode: MissionMode::Science,
            transfer_direction: None,
            observations_done: 0,
            observations_commanded: 10,
        }
    }

    #[test]
    fn science_exits_after_ten_observations() {
        let mut state = science_state();
        for k in 0..10 {
            assert_eq!(state.mode, MissionMode::Science, "left early at {k}");
            let (next, rejected) = mode_step(
                &state,
                &ModeEvents {
                    observation_attempted: true,
                    ..ModeEvents::default()
                },
            );
            assert!(rejected.is_empty());
            state = next;
        }
        assert_eq!(state.mode, MissionMode::Transfer);
        assert_eq!(state.transfer_direction, Some(TransferDirection::ToStandby));
    }

    #[test]
    fn safety_escalation_preempts_any_mode() {
        for mode in [
            MissionMode::Manual,
            MissionMode::Standby,
            MissionMode::Science,
            MissionMode::Transfer,
        ] {
            let state = ModeState {
                mode,
                ..ModeState::new(10)
            };
            let (next, _) = mode_step(
                &state,
                &ModeEvents {
                    safety_escalation: true,
                    ..ModeEvents::default()
                },
            );
            assert_eq!(next.mode, MissionMode::Escape, "from {mode:?}");
        }
    }

    #[test]
    fn ground_commands_are_ignored_in_science() {
        let state = science_state();
        let (next, rejected) = mode_step(
            &state,
            &ModeEvents {
                ground_command: Some(GroundCommand::BeginScienceCampaign),
                ..ModeEvents::default()
            },
        );
        assert_eq!(next.mode, MissionMode::Science);
        assert_eq!(rejected.len(), 1);
    }

    #[test]
    fn escape_returns_to_manual_after_execution() {
        let state = ModeState {
            mode: MissionMode::Escape,
            ..ModeState::new(10)
        };
        let (next, _) = mode_step(
            &state,
            &ModeEvents {
                escape_executed: true,
                ..ModeEvents::default()
            },
        );
        assert_eq!(next.mode, MissionMode::Manual);
    }

    #[test]
    fn fdir_mapping_matches_the_policy() {
        assert_eq!(
            fdir_respond(FdirFault::GncFault, MissionMode::Standby),
            FdirResponse::RoleSwitch
        );
        assert_eq!(
            fdir_respond(FdirFault::NonGncFault, MissionMode::Science),
            FdirResponse::TransferToStandby
        );
        assert_eq!(
            fdir_respond(FdirFault::NonGncFault, MissionMode::Transfer),
            FdirResponse::TransferToStandby
        );
        assert_eq!(
            fdir_respond(FdirFault::NonGncFault, MissionMode::Standby),
            FdirResponse::RoleSwitch
        );
        assert_eq!(
            fdir_respond(FdirFault::SafetyViolation, MissionMode::Manual),
            FdirResponse::Escape
        );
    }

    #[test]
    fn exhaustive_event_sequences_reach_no_undefined_state() {
        // Depth-6 enumeration over a representative event alphabet: the
        // machine must never panic, and Escape must stay reachable from
        // every mode.
        let alphabet: Vec<ModeEvents> = vec![
            ModeEvents {
                ground_command: Some(GroundCommand::EnterStandby),
                ..ModeEvents::default()
            },
            ModeEvents {
                ground_command: Some(GroundCommand::BeginScienceCampaign),
                ..ModeEvents::default()
            },
            ModeEvents {
                transfer_complete: true,
                ..ModeEvents::default()
            },
            ModeEvents {
                observation_attempted: true,
                ..ModeEvents::default()
            },
            ModeEvents {
                safety_escalation: true,
                ..ModeEvents::default()
            },
            ModeEvents {
                escape_executed: true,
                ..ModeEvents::default()
            },
            ModeEvents {
                fdir: Some(FdirResponse::TransferToStandby),
                ..ModeEvents::default()
            },
        ];

        let mut reached = std::collections::BTreeSet::new();
        let mut stack = vec![(ModeState::new(2), 0usize)];
        while let Some((state, depth)) = stack.pop() {
            reached.insert(format!("{:?}", state.mode));
            if depth == 6 {
                continue;
            }
            for ev in &alphabet {
                let (next, _) = mode_step(&state, ev);
                stack.push((next, depth + 1));
            }
        }
        for mode in ["Manual", "Standby", "Science", "Transfer", "Escape"] {
            assert!(reached.contains(mode), "{mode} unreachable");
        }

        // Escape reachable from every mode in one step.
        for mode in [
            MissionMode::Manual,
            MissionMode::Standby,
            MissionMode::Science,
            MissionMode::Transfer,
        ] {
            let state = ModeState {
                mode,
                ..ModeState::new(2)
            };
            let (next, _) = mode_step(
                &state,
                &ModeEvents {
                    safety_escalation: true,
                    ..ModeEvents::default()
                },
            );
            assert_eq!(next.mode, MissionMode::Escape);
        }
    }
}
