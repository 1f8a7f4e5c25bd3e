//! Mission layer: the five-mode state machine, FDIR response mapping,
//! actuator execution with the cold-gas constraints, the inter-spacecraft
//! crosslink, and the observation alignment metrics.

mod actuator;
pub mod alignment;
mod crosslink;
mod modes;

pub use actuator::{execute_maneuver, ActuatorModel, ActuatorState, ExecutionOutcome};
pub use alignment::{evaluate_alignment, AlignmentMetrics, AlignmentSample, InternalGeometry};
pub use crosslink::{Crosslink, CrosslinkMessage, CrosslinkPayload};
pub use modes::{
    fdir_respond, mode_step, FdirFault, FdirResponse, GroundCommand, MissionMode, ModeEvents,
    ModeState, TransferDirection,
};
