//! Run configuration, parameter catalogs and parameter files.
//!
//! Everything is JSON. Relative paths inside a run config are resolved
//! against the directory holding the config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridsim::{BusId, ControlParam, GridModel, IbrParams, SimError, SimSettings};
use crate::objective::{MetricConfig, Scenario, ScenarioSet};
use crate::orchestrator::{DecisionSpace, GridOracle, Hyperparameters, Oracle, OracleError, ParamSlot};
use crate::zo::BoxBounds;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid<T>(key: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid { key: key.into(), message: message.into() })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Buses whose frequencies enter the metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BusSelection {
    Named(NamedSelection),
    List(Vec<BusId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedSelection {
    IbrBuses,
}

impl Default for BusSelection {
    fn default() -> Self {
        BusSelection::Named(NamedSelection::IbrBuses)
    }
}

fn default_lambda() -> f64 {
    0.5
}
fn default_t_o() -> f64 {
    4.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Start of the oscillation window, seconds.
    #[serde(default = "default_t_o")]
    pub t_o: f64,
    #[serde(default)]
    pub n_opt: BusSelection,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { lambda: default_lambda(), t_o: default_t_o(), n_opt: BusSelection::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridProblem {
    pub grid: PathBuf,
    pub catalog: PathBuf,
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub metric: MetricSpec,
}

/// `‖x − target‖²` on the unit box; the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticProblem {
    pub target: Vec<f64>,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Grid(GridProblem),
    Quadratic(QuadraticProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogOptions {
    /// Write a checkpoint after every iteration.
    #[serde(default = "default_true")]
    pub checkpoints: bool,
    /// Export initial and final trajectories for every scenario.
    #[serde(default = "default_true")]
    pub trajectories: bool,
}

fn default_true() -> bool {
    true
}

impl Default for LogOptions {
    fn default() -> Self {
        Self { checkpoints: true, trajectories: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub problem: Problem,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
    /// Worker cap; 0 means all cores.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub log: LogOptions,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub max_iterations: Option<u64>,
    pub no_adam: bool,
    pub parallelism: Option<usize>,
}

impl RunConfig {
    /// Applies overrides and returns the keys they replaced.
    pub fn apply(&mut self, o: &Overrides) -> Vec<String> {
        let mut applied = Vec::new();
        if let Some(seed) = o.seed {
            self.seed = seed;
            applied.push(format!("seed={seed}"));
        }
        if let Some(n) = o.batch_size {
            self.hyperparameters.batch_size = n;
            applied.push(format!("hyperparameters.batch_size={n}"));
        }
        if let Some(k) = o.max_iterations {
            self.hyperparameters.max_iterations = k;
            applied.push(format!("hyperparameters.max_iterations={k}"));
        }
        if o.no_adam {
            self.hyperparameters.use_adam = false;
            applied.push("hyperparameters.use_adam=false".into());
        }
        if let Some(p) = o.parallelism {
            self.parallelism = p;
            applied.push(format!("parallelism={p}"));
        }
        applied
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != CONFIG_SCHEMA {
            return invalid("schema", format!("expected {CONFIG_SCHEMA}, got {}", self.schema));
        }
        validate_hyperparameters(&self.hyperparameters)?;
        match &self.problem {
            Problem::Quadratic(q) => {
                if q.target.is_empty() {
                    return invalid("problem.target", "must not be empty");
                }
                if q.initial.len() != q.target.len() {
                    return invalid(
                        "problem.initial",
                        format!("has {} entries, target has {}", q.initial.len(), q.target.len()),
                    );
                }
                for (key, values) in [("problem.target", &q.target), ("problem.initial", &q.initial)] {
                    if let Some(j) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
                        return invalid(format!("{key}[{j}]"), format!("{} is outside [0, 1]", values[j]));
                    }
                }
                Ok(())
            }
            Problem::Grid(_) => self.prepare().map(|_| ()),
        }
    }

    /// Builds the oracle and the normalized start point.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        match &self.problem {
            Problem::Quadratic(q) => {
                let space = DecisionSpace::unit(q.target.len())
                    .map_err(|e| ConfigError::Invalid { key: "problem.target".into(), message: e.to_string() })?;
                Ok(Prepared {
                    oracle: ProblemOracle::Quadratic(QuadraticOracle { target: q.target.clone(), space }),
                    x0: q.initial.clone(),
                    catalog: None,
                })
            }
            Problem::Grid(g) => prepare_grid(g),
        }
    }
}

fn validate_hyperparameters(h: &Hyperparameters) -> Result<(), ConfigError> {
    let key = |k: &str| format!("hyperparameters.{k}");
    if h.batch_size == 0 {
        return invalid(key("batch_size"), "must be at least 1");
    }
    if h.max_iterations == 0 {
        return invalid(key("max_iterations"), "must be at least 1");
    }
    for (name, v) in [("eta1", h.eta1), ("r1", h.r1), ("eta_min", h.eta_min), ("r_min", h.r_min), ("tau", h.tau)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(key(name), format!("must be positive, got {v}"));
        }
    }
    if h.eta1 < h.eta_min {
        return invalid(key("eta1"), format!("{} is below eta_min {}", h.eta1, h.eta_min));
    }
    if h.r1 < h.r_min {
        return invalid(key("r1"), format!("{} is below r_min {}", h.r1, h.r_min));
    }
    for (name, v) in [("gamma_eta", h.gamma_eta), ("gamma_r", h.gamma_r)] {
        if !(v > 0.0 && v < 1.0) {
            return invalid(key(name), format!("must lie in (0, 1), got {v}"));
        }
    }
    for (name, v) in [("beta1", h.beta1), ("beta2", h.beta2)] {
        if !(0.0..1.0).contains(&v) {
            return invalid(key(name), format!("must lie in [0, 1), got {v}"));
        }
    }
    if !(h.epsilon > 0.0 && h.epsilon.is_finite()) {
        return invalid(key("epsilon"), format!("must be positive, got {}", h.epsilon));
    }
    Ok(())
}

fn prepare_grid(g: &GridProblem) -> Result<Prepared, ConfigError> {
    let model = GridModel::load(&g.grid)
        .map_err(|e| ConfigError::Invalid { key: "problem.grid".into(), message: e.to_string() })?;
    let catalog = ParameterCatalog::load(&g.catalog)?;
    catalog.check(&model)?;
    if g.scenarios.is_empty() {
        return invalid("problem.scenarios", "at least one scenario is required");
    }
    let settings = SimSettings::from(&model.numerics);
    settings
        .step_counts()
        .map_err(|e| ConfigError::Invalid { key: "problem.grid.numerics".into(), message: e.to_string() })?;
    for (i, s) in g.scenarios.iter().enumerate() {
        let key = format!("problem.scenarios[{i}]");
        if !(s.weight >= 0.0 && s.weight.is_finite()) {
            return invalid(format!("{key}.weight"), format!("must be finite and non-negative, got {}", s.weight));
        }
        if g.scenarios[..i].iter().any(|o| o.name == s.name) {
            return invalid(format!("{key}.name"), format!("duplicate scenario name {}", s.name));
        }
        s.disturbance
            .validate(&model)
            .map_err(|e| ConfigError::Invalid { key: format!("{key}.disturbance"), message: e.to_string() })?;
        if !(s.disturbance.t_d < g.metric.t_o) {
            return invalid(
                "problem.metric.t_o",
                format!("{} must come after the disturbance time {} of {}", g.metric.t_o, s.disturbance.t_d, s.name),
            );
        }
    }
    if !(0.0..=1.0).contains(&g.metric.lambda) {
        return invalid("problem.metric.lambda", format!("must lie in [0, 1], got {}", g.metric.lambda));
    }
    if !(g.metric.t_o < settings.horizon) {
        return invalid("problem.metric.t_o", format!("must precede the horizon {}", settings.horizon));
    }
    let n_opt = match &g.metric.n_opt {
        BusSelection::Named(NamedSelection::IbrBuses) => model.ibr_buses(),
        BusSelection::List(list) => {
            if list.is_empty() {
                return invalid("problem.metric.n_opt", "must name at least one bus");
            }
            if let Some(i) = list.iter().position(|b| model.bus(*b).is_none()) {
                return invalid(format!("problem.metric.n_opt[{i}]"), format!("bus {} is not in the grid", list[i]));
            }
            list.clone()
        }
    };
    let t_d = g.scenarios[0].disturbance.t_d;
    if g.scenarios.iter().any(|s| s.disturbance.t_d != t_d) {
        return invalid("problem.scenarios", "all scenarios must share one disturbance time");
    }
    let metric = MetricConfig {
        lambda: g.metric.lambda,
        t_d,
        t_o: g.metric.t_o,
        horizon: settings.horizon,
        dt: settings.dt_sample,
        n_opt,
        omega0: model.bases.frequency_hz,
    };
    let decision = catalog.decision(&model)?;
    let scenarios = ScenarioSet::new(g.scenarios.clone())
        .map_err(|e| ConfigError::Invalid { key: "problem.scenarios".into(), message: e.to_string() })?;
    let x0 = decision.space.normalize(&decision.initial);
    let oracle = GridOracle::new(model, decision.base, decision.slots, decision.space, scenarios, metric, settings)
        .map_err(|e| ConfigError::Invalid { key: "problem".into(), message: e.to_string() })?;
    Ok(Prepared { oracle: ProblemOracle::Grid(Box::new(oracle)), x0, catalog: Some(catalog) })
}

/// Reads, resolves and validates a run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let mut config: RunConfig = parse(path, &read(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let Problem::Grid(g) = &mut config.problem {
        g.grid = base.join(&g.grid);
        g.catalog = base.join(&g.catalog);
    }
    config.validate()?;
    Ok(config)
}

pub fn write_config(config: &RunConfig, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(config).expect("config serializes");
    fs::write(path, text).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogUnit {
    pub ibr: String,
    pub bus: BusId,
    pub p_init_mw: f64,
    pub q_init_mvar: f64,
    pub params: BTreeMap<ControlParam, ParamEntry>,
}

/// Initial values and feasible intervals of every tunable inverter parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterCatalog {
    pub schema: u32,
    /// Grid file the catalog was written for; informational.
    #[serde(default)]
    pub grid: String,
    pub units: Vec<CatalogUnit>,
}

/// Decision layout derived from a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub base: Vec<IbrParams>,
    pub slots: Vec<ParamSlot>,
    pub space: DecisionSpace,
    /// Physical initial values, one per slot.
    pub initial: Vec<f64>,
}

impl ParameterCatalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let catalog: ParameterCatalog = parse(path, &read(path)?)?;
        if catalog.schema != CONFIG_SCHEMA {
            return invalid("catalog.schema", format!("expected {CONFIG_SCHEMA}, got {}", catalog.schema));
        }
        Ok(catalog)
    }

    pub fn unit(&self, name: &str) -> Option<&CatalogUnit> {
        self.units.iter().find(|u| u.ibr == name)
    }

    /// Checks the catalog against a grid: one entry per inverter, the exact
    /// parameter set of its kind, and `lower ≤ initial ≤ upper`.
    pub fn check(&self, model: &GridModel) -> Result<(), ConfigError> {
        for (i, unit) in self.units.iter().enumerate() {
            let key = format!("catalog.units[{i}]");
            let Some(ibr) = model.ibr(&unit.ibr) else {
                return invalid(format!("{key}.ibr"), format!("{} is not an inverter of the grid", unit.ibr));
            };
            if ibr.bus != unit.bus {
                return invalid(format!("{key}.bus"), format!("grid places {} at bus {}", unit.ibr, ibr.bus));
            }
            if self.units[..i].iter().any(|u| u.ibr == unit.ibr) {
                return invalid(format!("{key}.ibr"), format!("duplicate entry for {}", unit.ibr));
            }
            let expected = ControlParam::for_kind(ibr.kind);
            if unit.params.len() != expected.len() || expected.iter().any(|p| !unit.params.contains_key(p)) {
                let names: Vec<&str> = expected.iter().map(|p| p.as_str()).collect();
                return invalid(format!("{key}.params"), format!("{:?} units take exactly {names:?}", ibr.kind));
            }
            for (param, e) in &unit.params {
                let pkey = format!("{key}.params.{param}");
                if !(e.lower.is_finite() && e.upper.is_finite() && e.initial.is_finite()) {
                    return invalid(pkey, "values must be finite");
                }
                if e.lower > e.upper {
                    return invalid(format!("{pkey}.lower"), format!("{} exceeds upper {}", e.lower, e.upper));
                }
                if !(e.lower..=e.upper).contains(&e.initial) {
                    return invalid(
                        format!("{pkey}.initial"),
                        format!("{} is outside [{}, {}]", e.initial, e.lower, e.upper),
                    );
                }
                if e.lower <= 0.0 {
                    return invalid(format!("{pkey}.lower"), "gains must stay positive");
                }
            }
        }
        if let Some(missing) = model.ibrs.iter().find(|u| self.unit(&u.name).is_none()) {
            return invalid("catalog.units", format!("no entry for inverter {}", missing.name));
        }
        Ok(())
    }

    /// Decision coordinates in grid inverter order, parameters in canonical
    /// order per kind. Coordinate names are `<ibr>.<param>`.
    pub fn decision(&self, model: &GridModel) -> Result<Decision, ConfigError> {
        self.check(model)?;
        let mut base = Vec::with_capacity(model.ibrs.len());
        let (mut slots, mut names, mut lower, mut upper, mut initial) = (vec![], vec![], vec![], vec![], vec![]);
        for (index, ibr) in model.ibrs.iter().enumerate() {
            let unit = self.unit(&ibr.name).expect("checked above");
            let mut params = IbrParams::uniform(ibr.kind, 1.0);
            for &param in ControlParam::for_kind(ibr.kind) {
                let e = unit.params[&param];
                params.set(param, e.initial);
                slots.push(ParamSlot { ibr: index, param });
                names.push(format!("{}.{}", ibr.name, param));
                lower.push(e.lower);
                upper.push(e.upper);
                initial.push(e.initial);
            }
            base.push(params);
        }
        let bounds = BoxBounds::new(lower, upper)
            .map_err(|e| ConfigError::Invalid { key: "catalog".into(), message: e.to_string() })?;
        let space = DecisionSpace::new(names, bounds)
            .map_err(|e| ConfigError::Invalid { key: "catalog".into(), message: e.to_string() })?;
        Ok(Decision { base, slots, space, initial })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamValue {
    pub parameter: String,
    pub value: f64,
}

/// Named physical parameter values, as written by `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub schema: u32,
    pub parameters: Vec<ParamValue>,
}

impl ParamsFile {
    pub fn from_point(space: &DecisionSpace, x: &[f64]) -> Self {
        let parameters = space
            .names
            .iter()
            .zip(space.denormalize(x))
            .map(|(name, value)| ParamValue { parameter: name.clone(), value })
            .collect();
        Self { schema: CONFIG_SCHEMA, parameters }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let file: ParamsFile = parse(path, &read(path)?)?;
        if file.schema != CONFIG_SCHEMA {
            return invalid("params.schema", format!("expected {CONFIG_SCHEMA}, got {}", file.schema));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        fs::write(path, text).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    /// Normalized point: listed parameters replace the matching entries of
    /// `start`, the rest keep their start values. Values outside the
    /// feasible box are rejected.
    pub fn to_point(&self, space: &DecisionSpace, start: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let mut physical = space.denormalize(start);
        for (i, p) in self.parameters.iter().enumerate() {
            let key = format!("params.parameters[{i}]");
            let Some(j) = space.names.iter().position(|n| *n == p.parameter) else {
                return invalid(format!("{key}.parameter"), format!("unknown parameter {}", p.parameter));
            };
            let (lo, hi) = (space.bounds.lower()[j], space.bounds.upper()[j]);
            if !(lo..=hi).contains(&p.value) {
                return invalid(format!("{key}.value"), format!("{} is outside [{lo}, {hi}]", p.value));
            }
            physical[j] = p.value;
        }
        Ok(space.normalize(&physical))
    }
}

/// `‖x − target‖²` over the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOracle {
    pub target: Vec<f64>,
    space: DecisionSpace,
}

impl QuadraticOracle {
    pub fn new(target: Vec<f64>) -> Result<Self, crate::zo::ZoError> {
        let space = DecisionSpace::unit(target.len())?;
        Ok(Self { target, space })
    }
}

impl Oracle for QuadraticOracle {
    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn weights(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn evaluate_scenario(&self, x: &[f64], _scenario: usize) -> Result<f64, OracleError> {
        Ok(x.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    fn fingerprint(&self) -> String {
        format!("quadratic:{:?}", self.target.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    }
}

/// Oracle built from a config.
#[derive(Debug, Clone)]
pub enum ProblemOracle {
    Grid(Box<GridOracle>),
    Quadratic(QuadraticOracle),
}

impl ProblemOracle {
    pub fn grid(&self) -> Option<&GridOracle> {
        match self {
            ProblemOracle::Grid(g) => Some(g),
            ProblemOracle::Quadratic(_) => None,
        }
    }

    fn inner(&self) -> &dyn Oracle {
        match self {
            ProblemOracle::Grid(g) => g.as_ref(),
            ProblemOracle::Quadratic(q) => q,
        }
    }
}

impl Oracle for ProblemOracle {
    fn space(&self) -> &DecisionSpace {
        self.inner().space()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner().weights()
    }

    fn scenario_names(&self) -> Vec<String> {
        self.inner().scenario_names()
    }

    fn evaluate_scenario(&self, x: &[f64], scenario: usize) -> Result<f64, OracleError> {
        self.inner().evaluate_scenario(x, scenario)
    }

    fn fingerprint(&self) -> String {
        self.inner().fingerprint()
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub oracle: ProblemOracle,
    /// Normalized start point.
    pub x0: Vec<f64>,
    pub catalog: Option<ParameterCatalog>,
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Invalid { key: "problem.grid".into(), message: e.to_string() }
    }
}
