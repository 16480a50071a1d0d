use serde::{Deserialize, Serialize};

use super::{check_len, euclidean_norm, ZoError};

/// Per-coordinate feasible interval `[lower[j], upper[j]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds", into = "RawBounds")]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBounds> for BoxBounds {
    type Error = ZoError;

    fn try_from(raw: RawBounds) -> Result<Self, Self::Error> {
        BoxBounds::new(raw.lower, raw.upper)
    }
}

impl From<BoxBounds> for RawBounds {
    fn from(b: BoxBounds) -> Self {
        RawBounds { lower: b.lower, upper: b.upper }
    }
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ZoError> {
        if lower.is_empty() {
            return Err(ZoError::InvalidDimension);
        }
        check_len(lower.len(), upper.len())?;
        for (index, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ZoError::InvalidBounds { index, lower: lo, upper: hi });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^d`.
    pub fn unit(d: usize) -> Result<Self, ZoError> {
        Self::new(vec![0.0; d], vec![1.0; d])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Inclusive at both ends.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| lo <= v && v <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for DecisionVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl AsRef<[f64]> for DecisionVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean projection onto the box, i.e. coordinate-wise clamping.
pub fn project_box(x: &[f64], bounds: &BoxBounds) -> Result<DecisionVector, ZoError> {
    check_len(bounds.dimension(), x.len())?;
    Ok(DecisionVector(
        x.iter().zip(bounds.lower()).zip(bounds.upper()).map(|((&v, &lo), &hi)| v.min(hi).max(lo)).collect(),
    ))
}

/// `true` iff `‖next - prev‖₂ ≤ tau`.
pub fn converged(prev: &[f64], next: &[f64], tau: f64) -> Result<bool, ZoError> {
    check_len(prev.len(), next.len())?;
    let diff: Vec<f64> = prev.iter().zip(next).map(|(a, b)| b - a).collect();
    Ok(euclidean_norm(&diff) <= tau)
}
