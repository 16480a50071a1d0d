//! Reduced-order transient simulator for inverter-dominated grids.
//!
//! Grid-following units run an SRF-PLL, a frequency droop and a reduced
//! power loop; grid-forming units run a virtual synchronous generator whose
//! speed drives the source angle through reduced voltage and current
//! loops. The network is a lossless quasi-static DC model re-solved at
//! every derivative evaluation. Integration is fixed-step RK4.

mod devices;
mod integrator;
mod model;
mod network;
mod simulate;
mod trajectory;

pub use devices::{
    droop_setpoint, gfl_derivatives, gfm_derivatives, pi_lag_rates, pll_error, swing_acceleration, GflContext,
    GflRates, GflSignals, GflState, GfmContext, GfmRates, GfmState, PiLagState,
};
pub use integrator::Rk4;
pub use model::{
    Bases, Bus, BusId, BusKind, ControlParam, GflParams, GfmParams, GridModel, IbrKind, IbrParams, IbrUnit, Line,
    LineStatus, Load, Numerics,
};
pub use network::{Network, NetworkSolution};
pub use simulate::{init_equilibrium, simulate, Disturbance, DisturbanceKind, Equilibrium, SimSettings, Simulator};
pub use trajectory::{FrequencyTrajectory, FrequencyUnit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid grid model: {0}")]
    InvalidModel(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("invalid parameter {ibr}.{name} = {value}: gains must be positive and finite")]
    InvalidParams { ibr: String, name: String, value: f64 },
    #[error("infeasible dispatch: {ibr} would need {required} pu against a rating of {rating} pu")]
    InfeasibleDispatch { ibr: String, required: f64, rating: f64 },
    #[error("invalid disturbance: {0}")]
    InvalidDisturbance(String),
    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),
    #[error("simulation diverged at t = {time:.4} s ({location}, {state} = {value})")]
    Divergence { time: f64, location: String, state: String, value: f64 },
}

pub(crate) fn format_sig(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let exponent = value.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
        format!("{value:.decimals$}")
    } else {
        format!("{value:.prec$e}", prec = digits - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(60.0, 9), "60.0000000");
        assert_eq!(format_sig(59.98765432109, 9), "59.9876543");
        assert_eq!(format_sig(0.005, 9), "0.00500000000");
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.5e-7, 9), "1.50000000e-7");
    }
}
