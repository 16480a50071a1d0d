//! Transient-performance metric over frequency trajectories and the
//! scenario-weighted aggregate.
//!
//! Per bus the metric is `λ·max|f − f₀|` over the deviation window
//! `[t_d, T]` plus `(1 − λ)·var(f)` over the oscillation window `[t_o, T]`,
//! summed over the monitored buses. The variance is the population form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridsim::{BusId, Disturbance, FrequencyTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
    #[error("trajectory does not match the metric windows: {0}")]
    WindowMismatch(String),
    #[error("monitored bus {0} is not in the trajectory")]
    MissingBus(BusId),
    #[error("expected {expected} scenario values, got {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("scenario value {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub lambda: f64,
    pub t_d: f64,
    pub t_o: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_opt: Vec<BusId>,
    /// Nominal frequency in the trajectory's unit.
    pub omega0: f64,
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |msg: String| Err(ObjectiveError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.t_d >= 0.0 && self.t_d < self.t_o && self.t_o < self.horizon && self.horizon.is_finite()) {
            return bad(format!(
                "windows need 0 <= t_d < t_o < horizon, got t_d = {}, t_o = {}, horizon = {}",
                self.t_d, self.t_o, self.horizon
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_opt.is_empty() {
            return bad("n_opt must name at least one bus".into());
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return bad(format!("omega0 must be positive, got {}", self.omega0));
        }
        Ok(())
    }
}

/// Index of the first sample at or after `t`, tolerant to accumulated rounding in `t/dt`.
fn first_sample_at_or_after(t: f64, t_start: f64, dt: f64) -> usize {
    ((t - t_start) / dt - 1e-9).ceil().max(0.0) as usize
}

pub fn metric(traj: &FrequencyTrajectory, cfg: &MetricConfig) -> Result<f64, ObjectiveError> {
    cfg.validate()?;
    let mismatch = |msg: String| Err(ObjectiveError::WindowMismatch(msg));
    if (traj.dt - cfg.dt).abs() > 1e-12 * cfg.dt.max(1.0) {
        return mismatch(format!("sample step {} differs from the configured {}", traj.dt, cfg.dt));
    }
    if (traj.nominal - cfg.omega0).abs() > 1e-9 * cfg.omega0 {
        return mismatch(format!("trajectory nominal {} differs from omega0 {}", traj.nominal, cfg.omega0));
    }
    let n = traj.len();
    let last = first_sample_at_or_after(cfg.horizon, traj.t_start, traj.dt);
    if n == 0 || last >= n || traj.t_start > cfg.t_d + 1e-9 * cfg.dt {
        return mismatch(format!(
            "trajectory covers [{}, {}] but the windows need [{}, {}]",
            traj.t_start,
            traj.time(n.saturating_sub(1)),
            cfg.t_d,
            cfg.horizon
        ));
    }
    let dev = first_sample_at_or_after(cfg.t_d, traj.t_start, traj.dt)..last + 1;
    let osc = first_sample_at_or_after(cfg.t_o, traj.t_start, traj.dt)..last + 1;

    let mut total = 0.0;
    for &bus in &cfg.n_opt {
        let series = traj.bus(bus).ok_or(ObjectiveError::MissingBus(bus))?;
        let peak = series[dev.clone()].iter().map(|f| (f - cfg.omega0).abs()).fold(0.0, f64::max);
        let window = &series[osc.clone()];
        let count = window.len() as f64;
        let mean = window.iter().sum::<f64>() / count;
        let variance = window.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / count;
        total += cfg.lambda * peak + (1.0 - cfg.lambda) * variance;
    }
    Ok(total)
}

/// A named disturbance with its weight in the aggregate objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub weight: f64,
    pub disturbance: Disturbance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioSet(Vec<Scenario>);

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, ObjectiveError> {
        if scenarios.is_empty() {
            return Err(ObjectiveError::InvalidConfig("at least one scenario is required".into()));
        }
        for s in &scenarios {
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(ObjectiveError::InvalidConfig(format!(
                    "scenario {} weight must be finite and non-negative, got {}",
                    s.name, s.weight
                )));
            }
        }
        Ok(Self(scenarios))
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.weight).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Scenario> {
        self.0.iter().find(|s| s.name == name)
    }
}

/// `Σ_s w_s·values[s]` in scenario order.
pub fn aggregate(values: &[f64], weights: &[f64]) -> Result<f64, ObjectiveError> {
    if values.len() != weights.len() {
        return Err(ObjectiveError::CountMismatch { expected: weights.len(), found: values.len() });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(ObjectiveError::NonFinite { index, value: values[index] });
    }
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum())
}
