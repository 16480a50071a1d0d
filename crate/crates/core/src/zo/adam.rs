use serde::{Deserialize, Serialize};

use super::{check_len, GradientEstimate, ZoError};

/// Bias-corrected first and second moment estimates.
///
/// `k` is the index of the next update and starts at 1, so the first call
/// to [`update`](Self::update) divides by `1 - beta^1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub k: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(d: usize, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self, ZoError> {
        if d == 0 {
            return Err(ZoError::InvalidDimension);
        }
        for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(ZoError::InvalidAdam(format!("{name} must lie in [0, 1), got {beta}")));
            }
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ZoError::InvalidAdam(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { m: vec![0.0; d], v: vec![0.0; d], k: 1, beta1, beta2, epsilon })
    }

    pub fn dimension(&self) -> usize {
        self.m.len()
    }

    /// Folds `g` into the moments and returns the step direction
    /// `m_hat / (sqrt(v_hat) + epsilon)`. The iterate itself is not touched.
    pub fn update(&mut self, g: &GradientEstimate) -> Result<Vec<f64>, ZoError> {
        check_len(self.m.len(), g.g.len())?;
        let (b1, b2) = (self.beta1, self.beta2);
        let exponent = i32::try_from(self.k).unwrap_or(i32::MAX);
        let c1 = 1.0 - b1.powi(exponent);
        let c2 = 1.0 - b2.powi(exponent);
        let mut step = Vec::with_capacity(g.g.len());
        for ((m, v), &gj) in self.m.iter_mut().zip(self.v.iter_mut()).zip(&g.g) {
            *m = b1 * *m + (1.0 - b1) * gj;
            *v = b2 * *v + (1.0 - b2) * gj * gj;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            step.push(m_hat / (v_hat.sqrt() + self.epsilon));
        }
        self.k += 1;
        Ok(step)
    }

    /// Bias-corrected moments for the most recent update.
    pub fn corrected_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let last = i32::try_from(self.k.saturating_sub(1).max(1)).unwrap_or(i32::MAX);
        let c1 = 1.0 - self.beta1.powi(last);
        let c2 = 1.0 - self.beta2.powi(last);
        (self.m.iter().map(|m| m / c1).collect(), self.v.iter().map(|v| v / c2).collect())
    }
}
