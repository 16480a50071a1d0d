// Three-bus grid (one grid-forming, one grid-following inverter) under a
// 0.1 pu load step. Prints the nadir, the settled frequency and the
// steady state predicted by summing the droop gains.
//
// ```bash
// cargo run --release --example toy3_simulation -- out/toy3.csv
// ```

use gridtune::config::load_config;
use gridtune::gridsim::FrequencyTrajectory;
use gridtune::objective::metric;

pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/toy3_loadstep.json");

pub struct Toy3Report {
    pub trajectory: FrequencyTrajectory,
    pub nadir_hz: f64,
    pub settled_hz: f64,
    pub predicted_hz: f64,
    pub objective: f64,
}

pub fn run_example() -> anyhow::Result<Toy3Report> {
    let config = load_config(CONFIG)?;
    let prepared = config.prepare()?;
    let grid = prepared.oracle.grid().expect("toy3 is a grid problem");
    let trajectory = grid.simulate_scenario(&prepared.x0, 0)?;
    let objective = metric(&trajectory, grid.metric_config())?;

    let bus = grid.model().ibrs[0].bus;
    let series = trajectory.bus(bus).expect("inverter bus is monitored");
    let nadir_hz = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let settled_hz = *series.last().unwrap();

    let step = match grid.scenarios().scenarios()[0].disturbance.kind {
        gridtune::gridsim::DisturbanceKind::LoadStep { delta_p, .. } => delta_p,
        _ => 0.0,
    };
    let droop_sum: f64 =
        grid.params_at(&prepared.x0).iter().map(|p| p.get(gridtune::gridsim::ControlParam::D).unwrap()).sum();
    let f0 = grid.model().bases.frequency_hz;
    let predicted_hz = f0 * (1.0 - step / droop_sum);
    Ok(Toy3Report { trajectory, nadir_hz, settled_hz, predicted_hz, objective })
}

fn main() -> anyhow::Result<()> {
    let report = run_example()?;
    println!("nadir     {:.6} Hz", report.nadir_hz);
    println!("settled   {:.6} Hz", report.settled_hz);
    println!("predicted {:.6} Hz", report.predicted_hz);
    println!("objective {:.6}", report.objective);
    if let Some(path) = std::env::args().nth(1) {
        report.trajectory.write_csv(std::fs::File::create(&path)?)?;
        println!("trajectory written to {path}");
    }
    Ok(())
}
