use super::config::ScenarioConfig;
use super::report::{MonteCarloReport, RunReport, SweepPoint};
use super::scenario::run_scenario_indexed;

/// Independent seeded runs of one configuration; results ordered by run
/// index regardless of scheduling.
pub fn run_replicates(
    config: &ScenarioConfig,
    n_runs: usize,
    threads: usize,
) -> Result<Vec<RunReport>, String> {
    if n_runs == 0 {
        return Err("n_runs must be >= 1".into());
    }
    let threads = threads.max(1).min(n_runs);
    let mut results: Vec<Option<RunReport>> = vec![None; n_runs];

    if threads == 1 {
        for (idx, slot) in results.iter_mut().enumerate() {
            let (report, _) = run_scenario_indexed(config, idx as u64)?;
            *slot = Some(report);
        }
    } else {
        let errors = std::sync::Mutex::new(Vec::<String>::new());
        let next = std::sync::atomic::AtomicUsize::new(0);
        let outputs = std::sync::Mutex::new(vec![None; n_runs]);
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if idx >= n_runs {
                        break;
                    }
                    match run_scenario_indexed(config, idx as u64) {
                        Ok((report, _)) => {
                            outputs.lock().unwrap()[idx] = Some(report);
                        }
                        Err(e) => errors.lock().unwrap().push(format!("run {idx}: {e}")),
                    }
                });
            }
        });
        let errs = errors.into_inner().unwrap();
        if !errs.is_empty() {
            return Err(errs.join("; "));
        }
        results = outputs.into_inner().unwrap();
    }

    results
        .into_iter()
        .enumerate()
        .map(|(idx, r)| r.ok_or_else(|| format!("run {idx} produced no report")))
        .collect()
}

/// Parameter sweep: for each value, apply the override and run `runs_per_value`
/// replicates; aggregate alignment statistics per value.
pub fn run_monte_carlo(
    base: &ScenarioConfig,
    parameter: &str,
    values: &[f64],
    runs_per_value: usize,
    threads: usize,
) -> Result<MonteCarloReport, String> {
    let start = std::time::Instant::now();
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        config.apply_override(parameter, value)?;
        let reports = run_replicates(&config, runs_per_value, threads)?;

        let mut lateral: Vec<f64> = Vec::new();
        let mut attempts = 0usize;
        let mut successes = 0usize;
        let mut dv_sum = 0.0;
        for r in &reports {
            attempts += r.observations.len();
            successes += r.successes();
            dv_sum += r.dv_total;
            lateral.extend(r.observations.iter().map(|o| o.metrics.pointing_offset));
        }
        lateral.sort_by(|a, b| a.total_cmp(b));
        let quartile = |q: f64| -> f64 {
            if lateral.is_empty() {
                return f64::NAN;
            }
            let idx = ((lateral.len() - 1) as f64 * q).round() as usize;
            lateral[idx]
        };
        points.push(SweepPoint {
            parameter: parameter.to_string(),
            value,
            runs: reports.len(),
            attempts,
            successes,
            success_rate: if attempts > 0 {
                successes as f64 / attempts as f64
            } else {
                0.0
            },
            lateral_error_quartiles: [quartile(0.25), quartile(0.5), quartile(0.75)],
            dv_total_mean: dv_sum / reports.len() as f64,
        });
    }
    Ok(MonteCarloReport {
        scenario: base.name.clone(),
        parameter: parameter.to_string(),
        points,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}
