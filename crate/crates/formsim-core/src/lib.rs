//! Closed-loop simulation of a two-spacecraft formation-flying GNC system:
//! relative-orbit astrodynamics, J2 dynamics and state transition matrices,
//! single-frequency GNSS measurement simulation, carrier-phase differential
//! navigation with integer ambiguity resolution, a suite of impulsive
//! maneuver planners, a passive-safety engine, the mission-mode state
//! machine, and a deterministic Monte-Carlo harness.

pub mod astro;
pub mod attitude;
pub mod consts;
pub mod control;
pub mod dynamics;
pub mod gnss;
pub mod mission;
pub mod nav;
pub mod safety;
pub mod sim;
pub mod socp;
pub mod testkit;
pub mod types;
