use formsim_core::sim::{ScenarioConfig, Simulation};
use std::time::Instant;

fn main() {
    let mut config = ScenarioConfig::table5();
    config.campaign.observations = 1;
    config.campaign.standby_wait_s = 2700.0;
    config.campaign.max_duration_orbits = 16.0;
    let sim = Simulation::new(config, 0).unwrap();
    let t0 = Instant::now();
    let (report, _) = sim.run().unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("{} ticks in {:.2} s -> {:.3} ms/tick", report.duration_s, dt, dt / report.duration_s * 1e3);
}
