//! Qualitative simulator properties on the shipped grids.

mod common;

use common::config;
use gridtune::config::load_config;
use gridtune::gridsim::{simulate, BusKind, ControlParam, FrequencyTrajectory, IbrKind, IbrParams};
use gridtune::orchestrator::GridOracle;

fn shipped(name: &str) -> (GridOracle, Vec<IbrParams>) {
    let p = load_config(config(name)).unwrap().prepare().unwrap();
    let grid = p.oracle.grid().unwrap().clone();
    let params = grid.params_at(&p.x0);
    (grid, params)
}

/// Largest sample-to-sample slope in Hz/s over `[t_d, t_d + window]`.
fn max_slope(series: &[f64], traj: &FrequencyTrajectory, t_d: f64, window: f64) -> f64 {
    (1..series.len())
        .filter(|&k| traj.time(k) >= t_d - 1e-9 && traj.time(k) <= t_d + window + 1e-9)
        .map(|k| ((series[k] - series[k - 1]) / traj.dt).abs())
        .fold(0.0, f64::max)
}

#[test]
fn more_inertia_slows_the_initial_slope() {
    for name in ["toy3_loadstep.json", "scenario1_loadstep.json", "scenario2_linetrip.json"] {
        let (grid, base) = shipped(name);
        let model = grid.model();
        let dist = &grid.scenarios().scenarios()[0].disturbance;
        let mut heavy = base.clone();
        for p in heavy.iter_mut().filter(|p| p.kind() == IbrKind::Gfm) {
            let m = p.get(ControlParam::M).unwrap();
            p.set(ControlParam::M, 2.0 * m);
        }
        let light = simulate(model, &base, dist, grid.sim_settings()).unwrap();
        let heavy = simulate(model, &heavy, dist, grid.sim_settings()).unwrap();
        // grid-forming buses report the swing frequency the inertia acts on
        for (i, bus) in model.buses.iter().enumerate().filter(|(_, b)| b.kind == BusKind::Gfm) {
            let before = max_slope(&light.series[i], &light, dist.t_d, 0.2);
            let after = max_slope(&heavy.series[i], &heavy, dist.t_d, 0.2);
            assert!(after < before, "{name} bus {}: {after} !< {before}", bus.id);
        }
    }
}

#[test]
fn trajectories_are_bit_identical() {
    let (grid, params) = shipped("scenario2_linetrip.json");
    let dist = &grid.scenarios().scenarios()[0].disturbance;
    let a = simulate(grid.model(), &params, dist, grid.sim_settings()).unwrap();
    let b = simulate(grid.model(), &params, dist, grid.sim_settings()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn load_step_dips_then_settles() {
    let (grid, params) = shipped("scenario1_loadstep.json");
    let dist = &grid.scenarios().scenarios()[0].disturbance;
    let traj = simulate(grid.model(), &params, dist, grid.sim_settings()).unwrap();
    let buses = grid.model().ibr_buses();
    let mut nadir = (f64::INFINITY, 0.0);
    for &id in &buses {
        for (k, &v) in traj.bus(id).unwrap().iter().enumerate() {
            if v < nadir.0 {
                nadir = (v, traj.time(k));
            }
        }
    }
    let depth = traj.nominal - nadir.0;
    assert!(depth > 0.0 && nadir.1 >= dist.t_d - 1e-9, "nadir {nadir:?}");
    // the last half second is close to the droop line and nearly flat
    let tail = (0.5 / traj.dt).round() as usize;
    for &id in &buses {
        let s = traj.bus(id).unwrap();
        let last = s[s.len() - 1];
        assert!(traj.nominal - last < 0.05 * depth, "bus {id} ends at {last}, nadir {nadir:?}");
        assert!((last - s[s.len() - 1 - tail]).abs() < 0.01 * depth, "bus {id} still moving");
    }
}
