use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_len, euclidean_norm, ZoError};

/// Gaussian draws shorter than this are discarded and redrawn.
const MIN_GAUSSIAN_NORM: f64 = 1e-12;

/// Draws a direction uniformly from the unit sphere in `d` dimensions by
/// normalizing a standard Gaussian vector.
pub fn sample_unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>, ZoError> {
    if d == 0 {
        return Err(ZoError::InvalidDimension);
    }
    loop {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = euclidean_norm(&u);
        if norm >= MIN_GAUSSIAN_NORM {
            u.iter_mut().for_each(|c| *c /= norm);
            return Ok(u);
        }
    }
}

/// Symmetric two-point estimate `(d / 2r) (f(x + r u) - f(x - r u)) u`.
///
/// The perturbed points are passed to `oracle` as-is; no projection is
/// applied to them.
pub fn two_point_gradient<F>(mut oracle: F, x: &[f64], r: f64, u: &[f64]) -> Result<Vec<f64>, ZoError>
where
    F: FnMut(&[f64]) -> f64,
{
    check_len(x.len(), u.len())?;
    check_radius(r)?;
    let plus: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi + r * ui).collect();
    let minus: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi - r * ui).collect();
    let f_plus = finite_or_fail(oracle(&plus), plus)?;
    let f_minus = finite_or_fail(oracle(&minus), minus)?;
    let eval = DirectionalEval { f_plus, f_minus, direction: u.to_vec() };
    Ok(multi_point_gradient(std::slice::from_ref(&eval), r, x.len())?.g)
}

fn finite_or_fail(value: f64, point: Vec<f64>) -> Result<f64, ZoError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ZoError::OracleFailure { point, value })
    }
}

fn check_radius(r: f64) -> Result<(), ZoError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(ZoError::InvalidRadius(r))
    }
}

/// One antithetic pair of oracle values along a sampled direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalEval {
    pub f_plus: f64,
    pub f_minus: f64,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    pub batch_size: usize,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.g)
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().all(|v| v.is_finite())
    }
}

/// Averages the two-point estimates of a batch. Terms are accumulated in
/// batch order, so the result does not depend on how the evaluations were
/// scheduled.
pub fn multi_point_gradient(evals: &[DirectionalEval], r: f64, d: usize) -> Result<GradientEstimate, ZoError> {
    if evals.is_empty() {
        return Err(ZoError::InvalidBatch);
    }
    if d == 0 {
        return Err(ZoError::InvalidDimension);
    }
    check_radius(r)?;
    let scale = d as f64 / (2.0 * r);
    let mut g = vec![0.0; d];
    for eval in evals {
        check_len(d, eval.direction.len())?;
        for (value, point) in [(eval.f_plus, 1.0), (eval.f_minus, -1.0)] {
            if !value.is_finite() {
                // the perturbed point is not known here; report the direction sign instead
                let point = eval.direction.iter().map(|u| point * u).collect();
                return Err(ZoError::OracleFailure { point, value });
            }
        }
        let coeff = scale * (eval.f_plus - eval.f_minus);
        for (gj, uj) in g.iter_mut().zip(&eval.direction) {
            *gj += coeff * uj;
        }
    }
    let n = evals.len() as f64;
    g.iter_mut().for_each(|gj| *gj /= n);
    Ok(GradientEstimate { g, batch_size: evals.len() })
}
