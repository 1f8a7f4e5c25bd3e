use formsim_core::sim::{run_scenario, ScenarioConfig};

fn main() {
    let mut config = ScenarioConfig::table5();
    config.campaign.observations = 3;
    config.campaign.standby_wait_s = 2700.0;
    config.campaign.max_duration_orbits = 45.0;
    match run_scenario(&config) {
        Ok((report, telemetry)) => {
            println!("{}", report.to_markdown());
            println!("--- events ---");
            for e in &telemetry.events {
                println!("{}", serde_json::to_string(e).unwrap());
            }
        }
        Err(e) => println!("FAILED: {e}"),
    }
}
