use serde::{Deserialize, Serialize};

use super::{DecisionSpace, Oracle, OracleError};
use crate::gridsim::{simulate, ControlParam, FrequencyTrajectory, GridModel, IbrParams, SimSettings};
use crate::objective::{metric, MetricConfig, ScenarioSet};

/// Which inverter parameter a decision coordinate drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    /// Index into `GridModel::ibrs`.
    pub ibr: usize,
    pub param: ControlParam,
}

/// The simulator wrapped as a scenario-split oracle over normalized parameters.
#[derive(Debug, Clone)]
pub struct GridOracle {
    model: GridModel,
    base: Vec<IbrParams>,
    slots: Vec<ParamSlot>,
    space: DecisionSpace,
    scenarios: ScenarioSet,
    metric: MetricConfig,
    settings: SimSettings,
}

impl GridOracle {
    /// `base` holds the full parameter set in `model.ibrs` order; coordinates
    /// named by `slots` are overwritten on every evaluation.
    pub fn new(
        model: GridModel,
        base: Vec<IbrParams>,
        slots: Vec<ParamSlot>,
        space: DecisionSpace,
        scenarios: ScenarioSet,
        metric: MetricConfig,
        settings: SimSettings,
    ) -> Result<Self, OracleError> {
        let invalid = |msg: String| Err(OracleError::Invalid(msg));
        if base.len() != model.ibrs.len() {
            return invalid(format!("{} parameter sets for {} inverters", base.len(), model.ibrs.len()));
        }
        if slots.len() != space.dimension() {
            return invalid(format!("{} slots for a {}-dimensional space", slots.len(), space.dimension()));
        }
        for slot in &slots {
            match base.get(slot.ibr) {
                Some(p) if p.get(slot.param).is_some() => {}
                _ => return invalid(format!("slot {:?} does not name an existing parameter", slot)),
            }
        }
        for s in scenarios.scenarios() {
            s.disturbance.validate(&model)?;
        }
        metric.validate()?;
        let sample_count = settings.sample_count()?;
        if (metric.dt - settings.dt_sample).abs() > 1e-12 || (metric.horizon - settings.horizon).abs() > 1e-12 {
            return invalid(format!(
                "metric windows (dt {}, horizon {}) do not match the simulation (dt {}, horizon {})",
                metric.dt, metric.horizon, settings.dt_sample, settings.horizon
            ));
        }
        debug_assert!(sample_count > 0);
        if let Some(bus) = metric.n_opt.iter().find(|b| model.bus(**b).is_none()) {
            return invalid(format!("monitored bus {bus} is not in the grid"));
        }
        Ok(Self { model, base, slots, space, scenarios, metric, settings })
    }

    pub fn model(&self) -> &GridModel {
        &self.model
    }

    pub fn scenarios(&self) -> &ScenarioSet {
        &self.scenarios
    }

    pub fn metric_config(&self) -> &MetricConfig {
        &self.metric
    }

    pub fn sim_settings(&self) -> &SimSettings {
        &self.settings
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    /// Full inverter parameter sets at a normalized point.
    pub fn params_at(&self, x: &[f64]) -> Vec<IbrParams> {
        let mut params = self.base.clone();
        for (slot, value) in self.slots.iter().zip(self.space.denormalize(x)) {
            params[slot.ibr].set(slot.param, value);
        }
        params
    }

    pub fn simulate_scenario(&self, x: &[f64], scenario: usize) -> Result<FrequencyTrajectory, OracleError> {
        let s = self
            .scenarios
            .scenarios()
            .get(scenario)
            .ok_or_else(|| OracleError::Invalid(format!("no scenario with index {scenario}")))?;
        Ok(simulate(&self.model, &self.params_at(x), &s.disturbance, &self.settings)?)
    }
}

impl Oracle for GridOracle {
    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn weights(&self) -> Vec<f64> {
        self.scenarios.weights()
    }

    fn scenario_names(&self) -> Vec<String> {
        self.scenarios.scenarios().iter().map(|s| s.name.clone()).collect()
    }

    fn evaluate_scenario(&self, x: &[f64], scenario: usize) -> Result<f64, OracleError> {
        let traj = self.simulate_scenario(x, scenario)?;
        Ok(metric(&traj, &self.metric)?)
    }

    fn fingerprint(&self) -> String {
        serde_json::json!({
            "model": self.model,
            "base": self.base,
            "slots": self.slots,
            "space": self.space,
            "scenarios": self.scenarios,
            "metric": self.metric,
            "settings": self.settings,
        })
        .to_string()
    }
}
