//! Drives the projected multi-point ZO-Adam loop against a black-box oracle.
//!
//! The controller is sequential. Each iteration draws its directions on the
//! control path, fans the `2·N·|S|` perturbed evaluations (plus `|S|` for the
//! logged objective) out to a bounded rayon pool, gathers them in job order
//! and only then touches optimizer state. Results therefore do not depend on
//! the worker count.

mod grid;
mod run;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridsim::SimError;
use crate::objective::ObjectiveError;
use crate::zo::{BoxBounds, ZoError};

pub use grid::{GridOracle, ParamSlot};
pub use run::{
    evaluate, resume, run, Checkpoint, FnOracle, IterationRecord, JobSign, RngState, RunOutcome, RunSettings,
    StopReason,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("oracle returned a non-finite value {0}")]
    NonFinite(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Where a failed evaluation sat inside its iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobTag {
    pub iteration: u64,
    /// `None` for the unperturbed logging evaluation.
    pub direction: Option<usize>,
    pub sign: Option<JobSign>,
    pub scenario: usize,
}

impl std::fmt::Display for JobTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "iteration {}", self.iteration)?;
        match (self.direction, self.sign) {
            (Some(n), Some(sign)) => write!(f, ", direction {n}, sign {sign}")?,
            _ => write!(f, ", unperturbed iterate")?,
        }
        write!(f, ", scenario {}", self.scenario)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Zo(#[from] ZoError),
    #[error("evaluation failed at {tag}: {source}")]
    Oracle {
        tag: JobTag,
        /// Normalized point handed to the oracle.
        point: Vec<f64>,
        #[source]
        source: OracleError,
        checkpoint: Option<PathBuf>,
    },
    #[error("checkpoint was written for config {found}, current config is {expected}")]
    CheckpointMismatch { expected: String, found: String },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn default_eta1() -> f64 {
    0.1
}
fn default_r1() -> f64 {
    0.1
}
fn default_gamma_eta() -> f64 {
    0.9
}
fn default_gamma_r() -> f64 {
    0.95
}
fn default_floor() -> f64 {
    0.001
}
fn default_batch() -> usize {
    2
}
fn default_max_iterations() -> u64 {
    70
}
fn default_tau() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.99
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

/// Optimizer settings. Omitted keys take the reference tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    #[serde(default = "default_eta1")]
    pub eta1: f64,
    #[serde(default = "default_r1")]
    pub r1: f64,
    #[serde(default = "default_gamma_eta")]
    pub gamma_eta: f64,
    #[serde(default = "default_gamma_r")]
    pub gamma_r: f64,
    #[serde(default = "default_floor")]
    pub eta_min: f64,
    #[serde(default = "default_floor")]
    pub r_min: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Plain projected ZO steps when false.
    #[serde(default = "default_true")]
    pub use_adam: bool,
    /// One extra unperturbed evaluation per iteration for the log.
    #[serde(default = "default_true")]
    pub log_objective: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), ZoError> {
        if self.batch_size == 0 {
            return Err(ZoError::InvalidBatch);
        }
        if self.max_iterations == 0 {
            return Err(ZoError::InvalidSchedule("max_iterations must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ZoError::InvalidSchedule(format!("tau must be positive, got {}", self.tau)));
        }
        self.schedules()?;
        crate::zo::AdamState::new(1, self.beta1, self.beta2, self.epsilon)?;
        Ok(())
    }

    pub fn schedules(&self) -> Result<crate::zo::Schedules, ZoError> {
        crate::zo::Schedules::new(self.eta1, self.r1, self.gamma_eta, self.gamma_r, self.eta_min, self.r_min)
    }
}

/// Named physical parameters with their feasible box; the optimizer sees
/// the affine image `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub names: Vec<String>,
    pub bounds: BoxBounds,
}

impl DecisionSpace {
    pub fn new(names: Vec<String>, bounds: BoxBounds) -> Result<Self, ZoError> {
        if names.len() != bounds.dimension() {
            return Err(ZoError::DimensionMismatch { expected: bounds.dimension(), found: names.len() });
        }
        Ok(Self { names, bounds })
    }

    /// `x1..xd` on the unit box.
    pub fn unit(d: usize) -> Result<Self, ZoError> {
        Self::new((1..=d).map(|j| format!("x{j}")).collect(), BoxBounds::unit(d)?)
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        let (lo, hi) = (self.bounds.lower(), self.bounds.upper());
        x.iter().enumerate().map(|(j, v)| lo[j] + v * (hi[j] - lo[j])).collect()
    }

    /// Degenerate intervals map to 0.
    pub fn normalize(&self, physical: &[f64]) -> Vec<f64> {
        let (lo, hi) = (self.bounds.lower(), self.bounds.upper());
        physical
            .iter()
            .enumerate()
            .map(|(j, v)| if hi[j] > lo[j] { (v - lo[j]) / (hi[j] - lo[j]) } else { 0.0 })
            .collect()
    }
}

/// A black-box objective split by scenario. Evaluations must be pure
/// functions of their inputs so that parallel runs stay reproducible.
pub trait Oracle: Sync {
    fn space(&self) -> &DecisionSpace;

    /// Scenario weights; the aggregate is `Σ w_s·f_s`.
    fn weights(&self) -> Vec<f64>;

    fn scenario_names(&self) -> Vec<String> {
        (0..self.weights().len()).map(|s| format!("s{s}")).collect()
    }

    /// Evaluates one scenario at a normalized point.
    fn evaluate_scenario(&self, x: &[f64], scenario: usize) -> Result<f64, OracleError>;

    /// Stable description of everything that determines the oracle's values.
    fn fingerprint(&self) -> String;
}
