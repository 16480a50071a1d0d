// Tunes all 54 inverter gains of the modified 39-bus system against the
// load-step scenario (or the line trip, with `trip` as first argument).
//
// ```bash
// cargo run --release --example ieee39_tuning -- step 30 1
// ```

use gridtune::config::{load_config, ParamsFile};
use gridtune::orchestrator::{run, Oracle, RunOutcome, RunSettings};

pub fn config_path(scenario: &str) -> String {
    let file = if scenario == "trip" { "scenario2_linetrip.json" } else { "scenario1_loadstep.json" };
    format!("{}/configs/{file}", env!("CARGO_MANIFEST_DIR"))
}

pub fn run_example(scenario: &str, iterations: u64, seed: u64) -> anyhow::Result<(RunOutcome, ParamsFile)> {
    let mut config = load_config(config_path(scenario))?;
    config.hyperparameters.max_iterations = iterations;
    let prepared = config.prepare()?;
    let outcome = run(&prepared.oracle, &prepared.x0, &RunSettings::new(config.hyperparameters, seed))?;
    let params = ParamsFile::from_point(prepared.oracle.space(), &outcome.x);
    Ok((outcome, params))
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "step".into());
    let iterations = args.next().map(|s| s.parse()).transpose()?.unwrap_or(30);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let (outcome, params) = run_example(&scenario, iterations, seed)?;
    for r in &outcome.records {
        println!(
            "k {:>3}  f {:.5}  |g| {:.4}  eta {:.4}  r {:.4}",
            r.k,
            r.f.unwrap_or(f64::NAN),
            r.grad_norm,
            r.eta,
            r.r
        );
    }
    let first = outcome.records[0].f.unwrap_or(f64::NAN);
    let last = outcome.final_objective.unwrap_or(f64::NAN);
    println!("objective {first:.5} -> {last:.5} ({:.1}% of initial)", 100.0 * last / first);
    for p in &params.parameters {
        println!("  {:<16} {:.3}", p.parameter, p.value);
    }
    Ok(())
}
