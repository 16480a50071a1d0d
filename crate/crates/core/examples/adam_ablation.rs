// Iterations needed to push the quadratic benchmark below a threshold,
// with and without Adam.
//
// ```bash
// cargo run --release --example adam_ablation -- 0.01
// ```

use gridtune::config::load_config;
use gridtune::orchestrator::{run, RunSettings};

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quadratic_benchmark.json");

/// Mean first iteration whose logged objective is at or below `threshold`.
/// Runs that never get there count as `max_iterations + 1`.
pub fn iterations_to_threshold(use_adam: bool, threshold: f64, seeds: u64) -> anyhow::Result<f64> {
    let config = load_config(CONFIG)?;
    let prepared = config.prepare()?;
    let mut hyper = config.hyperparameters;
    hyper.use_adam = use_adam;
    let mut total = 0.0;
    for seed in 1..=seeds {
        let out = run(&prepared.oracle, &prepared.x0, &RunSettings::new(hyper, seed))?;
        let hit = out.records.iter().find(|r| r.f.is_some_and(|f| f <= threshold)).map(|r| r.k);
        total += hit.unwrap_or(hyper.max_iterations + 1) as f64;
    }
    Ok(total / seeds as f64)
}

pub fn run_example(threshold: f64, seeds: u64) -> anyhow::Result<(f64, f64)> {
    Ok((iterations_to_threshold(true, threshold, seeds)?, iterations_to_threshold(false, threshold, seeds)?))
}

fn main() -> anyhow::Result<()> {
    let threshold = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.01);
    let (with, without) = run_example(threshold, 10)?;
    println!("f <= {threshold}: {with:.1} iterations with Adam, {without:.1} without");
    Ok(())
}
