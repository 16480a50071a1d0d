//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use gridtune::gridsim::{ControlParam, GridModel, IbrKind, IbrParams};
use gridtune::orchestrator::IterationRecord;

pub const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

pub fn config(name: &str) -> String {
    format!("{CONFIGS}/{name}")
}

/// Plain-loop evaluation of the transient metric on raw sample arrays.
///
/// Sample `k` sits at `t_start + k·dt`; it belongs to a window `[a, horizon]`
/// when its time is no earlier than `a` (up to a billionth of a step). The
/// variance is accumulated with Welford's update.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_metric(
    series: &[Vec<f64>],
    t_start: f64,
    dt: f64,
    lambda: f64,
    t_d: f64,
    t_o: f64,
    horizon: f64,
    nominal: f64,
) -> f64 {
    let slack = 1e-9 * dt;
    let mut total = 0.0;
    for s in series {
        let mut peak: f64 = 0.0;
        let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for (k, &f) in s.iter().enumerate() {
            let t = t_start + k as f64 * dt;
            if t > horizon + slack {
                break;
            }
            if t >= t_d - slack {
                peak = peak.max((f - nominal).abs());
            }
            if t >= t_o - slack {
                count += 1.0;
                let delta = f - mean;
                mean += delta / count;
                m2 += delta * (f - mean);
            }
        }
        total += lambda * peak + (1.0 - lambda) * m2 / count;
    }
    total
}

/// Settled per-unit frequency deviation after a load step `delta_p`, from
/// the algebraic steady state: all inverters share one frequency, every
/// unit moves its output by `−D·Δω`, and the lossless network balances.
/// Returns `None` when a grid-following unit would leave its current limit.
pub fn droop_statics(model: &GridModel, params: &[IbrParams], delta_p: f64) -> Option<f64> {
    let droop: f64 = params.iter().map(|p| p.get(ControlParam::D).unwrap()).sum();
    let deviation = -delta_p / droop;
    let saturation = model.numerics.gfl_saturation;
    for (unit, p) in model.ibrs.iter().zip(params) {
        let output = unit.p_ref - p.get(ControlParam::D).unwrap() * deviation;
        if unit.kind == IbrKind::Gfl && output.abs() > saturation * unit.rating {
            return None;
        }
    }
    Some(deviation)
}

/// Records with the wall-clock column cleared; everything else must repeat exactly.
pub fn timeless(records: &[IterationRecord]) -> Vec<IterationRecord> {
    records.iter().cloned().map(|r| IterationRecord { wall_ms: 0.0, ..r }).collect()
}
