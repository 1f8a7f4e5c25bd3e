//! Software-in-the-loop closed-loop simulation, scenario configuration, the
//! Monte-Carlo driver, and report emission.

pub mod config;
pub mod guidance;
pub mod monte_carlo;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod telemetry;

pub use config::ScenarioConfig;
pub use guidance::ScienceGuidance;
pub use monte_carlo::{run_monte_carlo, run_replicates};
pub use report::{MonteCarloReport, RunReport};
pub use rng::SeedTree;
pub use scenario::{run_scenario, run_scenario_indexed, Simulation};
pub use telemetry::Telemetry;
