// Zeroth-order Adam on `‖x − x*‖²` over the unit box, driven from the shipped
// benchmark config.
//
// ```bash
// cargo run --release --example quadratic_benchmark
// ```

use gridtune::config::load_config;
use gridtune::orchestrator::{run, RunOutcome, RunSettings};

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quadratic_benchmark.json");

pub fn run_example(seed: u64) -> anyhow::Result<(Vec<f64>, RunOutcome)> {
    let config = load_config(CONFIG)?;
    let gridtune::config::Problem::Quadratic(q) = &config.problem else {
        anyhow::bail!("benchmark config is not a quadratic problem");
    };
    let prepared = config.prepare()?;
    let outcome = run(&prepared.oracle, &prepared.x0, &RunSettings::new(config.hyperparameters, seed))?;
    Ok((q.target.clone(), outcome))
}

fn main() -> anyhow::Result<()> {
    for seed in 1..=10 {
        let (target, out) = run_example(seed)?;
        let err = out.x.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "seed {seed:>2}: {:?} after {:>3} iterations, f = {:.2e}, max |x - x*| = {err:.4}",
            out.stop,
            out.records.len(),
            out.final_objective.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
