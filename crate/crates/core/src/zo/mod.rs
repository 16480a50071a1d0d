//! Projected multi-point zeroth-order optimization with adaptive moments.
//!
//! The pieces here know nothing about what the objective is. A caller
//! samples directions, queries its black box at `x ± r·u`, hands the
//! values to [`multi_point_gradient`], feeds the estimate through
//! [`AdamState::update`], and projects the step back onto the box with
//! [`project_box`]. Step size and smoothing radius shrink through
//! [`Schedules::decay`]; [`converged`] implements the stopping rule.

mod adam;
mod estimator;
mod projection;
mod schedule;

pub use adam::AdamState;
pub use estimator::{
    multi_point_gradient, sample_unit_direction, two_point_gradient, DirectionalEval, GradientEstimate,
};
pub use projection::{converged, project_box, BoxBounds, DecisionVector};
pub use schedule::Schedules;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZoError {
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("gradient batch must contain at least one directional evaluation")]
    InvalidBatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid bounds at index {index}: lower {lower} > upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("smoothing radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid Adam setting: {0}")]
    InvalidAdam(String),
    #[error("oracle returned non-finite value {value} at {point:?}")]
    OracleFailure { point: Vec<f64>, value: f64 },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), ZoError> {
    if expected == found {
        Ok(())
    } else {
        Err(ZoError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
