// Final objective on the quadratic benchmark as the number of directions
// per iteration grows from 1 to 6.
//
// ```bash
// cargo run --release --example batch_ablation
// ```

use gridtune::config::load_config;
use gridtune::orchestrator::{run, RunSettings};

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quadratic_benchmark.json");

/// Mean final objective per batch size, in order `1..=max_batch`.
pub fn run_example(max_batch: usize, seeds: u64) -> anyhow::Result<Vec<f64>> {
    let config = load_config(CONFIG)?;
    let prepared = config.prepare()?;
    let mut means = Vec::new();
    for n in 1..=max_batch {
        let mut total = 0.0;
        for seed in 1..=seeds {
            let mut hyper = config.hyperparameters;
            hyper.batch_size = n;
            let out = run(&prepared.oracle, &prepared.x0, &RunSettings::new(hyper, seed))?;
            total += out.final_objective.expect("logging is on");
        }
        means.push(total / seeds as f64);
    }
    Ok(means)
}

fn main() -> anyhow::Result<()> {
    for (n, mean) in run_example(6, 10)?.iter().enumerate() {
        println!("N = {}: mean final objective {mean:.3e}", n + 1);
    }
    Ok(())
}
