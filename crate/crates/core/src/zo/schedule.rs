use serde::{Deserialize, Serialize};

use super::ZoError;

/// Geometrically decaying step size and smoothing radius with floors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub eta: f64,
    pub r: f64,
    pub gamma_eta: f64,
    pub gamma_r: f64,
    pub eta_min: f64,
    pub r_min: f64,
}

impl Schedules {
    pub fn new(eta: f64, r: f64, gamma_eta: f64, gamma_r: f64, eta_min: f64, r_min: f64) -> Result<Self, ZoError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ZoError::InvalidSchedule(format!("{name} must be positive, got {v}")))
            }
        };
        positive("eta", eta)?;
        positive("r", r)?;
        positive("eta_min", eta_min)?;
        positive("r_min", r_min)?;
        for (name, gamma) in [("gamma_eta", gamma_eta), ("gamma_r", gamma_r)] {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(ZoError::InvalidSchedule(format!("{name} must lie in (0, 1), got {gamma}")));
            }
        }
        if eta < eta_min {
            return Err(ZoError::InvalidSchedule(format!("eta {eta} is below eta_min {eta_min}")));
        }
        if r < r_min {
            return Err(ZoError::InvalidSchedule(format!("r {r} is below r_min {r_min}")));
        }
        Ok(Self { eta, r, gamma_eta, gamma_r, eta_min, r_min })
    }

    #[must_use]
    pub fn decay(&self) -> Self {
        Self { eta: (self.gamma_eta * self.eta).max(self.eta_min), r: (self.gamma_r * self.r).max(self.r_min), ..*self }
    }
}
