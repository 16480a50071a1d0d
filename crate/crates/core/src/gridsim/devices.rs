//! Inverter control dynamics.
//!
//! Angles are measured in a frame rotating at the nominal frequency, so a
//! locked PLL or a grid-forming unit at nominal speed has a constant angle.
//! Frequencies inside the droop and swing laws are per-unit of nominal.
//!
//! Inner voltage and current loops are reduced to a PI controller driving
//! an integrating plant with time constant `c`:
//!
//! ```text
//! c·ẏ = K_p·(r − y) + z,    ż = K_i·(r − y)
//! ```
//!
//! The dominant closed-loop time constant is `c / K_p`; `K_i` sets a slow
//! mode that is almost cancelled by the controller zero at `−K_i / K_p`.

use serde::{Deserialize, Serialize};

use super::model::{GflParams, GfmParams};

/// Output `y` and integrator `z` of a reduced PI loop.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PiLagState {
    pub y: f64,
    pub z: f64,
}

impl PiLagState {
    pub fn settled(y: f64) -> Self {
        Self { y, z: 0.0 }
    }
}

pub fn pi_lag_rates(state: PiLagState, input: f64, kp: f64, ki: f64, time_constant: f64) -> PiLagState {
    let error = input - state.y;
    PiLagState { y: (kp * error + state.z) / time_constant, z: ki * error }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflState {
    /// PLL integrator, rad/s.
    pub phi_pll: f64,
    /// PLL angle relative to the nominal rotating frame, rad.
    pub theta: f64,
    /// Low-passed PLL frequency used by the droop, per-unit.
    pub omega_meas: f64,
    /// Tracked active power and its loop integrator, per-unit.
    pub power: PiLagState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GflContext {
    pub p_ref: f64,
    pub omega_ref: f64,
    pub omega0_rad: f64,
    pub loop_time_constant: f64,
    pub freq_filter: f64,
    pub p_limit: f64,
}

/// Algebraic outputs of the grid-following controller at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GflSignals {
    pub u_q: f64,
    /// PLL frequency error, rad/s.
    pub delta_omega: f64,
    /// PLL frequency, per-unit.
    pub omega_pll: f64,
    /// Droop output before the rating limit.
    pub p_set: f64,
    /// Droop output after the rating limit; this is what the power loop tracks.
    pub p_command: f64,
}

pub type GflRates = GflState;

/// q-axis voltage seen by the PLL for a 1 pu terminal voltage.
pub fn pll_error(bus_angle: f64, theta_pll: f64) -> f64 {
    (bus_angle - theta_pll).sin()
}

/// `P_set = D·(ω_ref − ω) + P_ref`.
pub fn droop_setpoint(d_droop: f64, omega_ref: f64, omega: f64, p_ref: f64) -> f64 {
    d_droop * (omega_ref - omega) + p_ref
}

pub fn gfl_derivatives(
    state: &GflState,
    bus_angle: f64,
    params: &GflParams,
    ctx: &GflContext,
) -> (GflRates, GflSignals) {
    let u_q = pll_error(bus_angle, state.theta);
    let delta_omega = params.kp_pll * u_q + state.phi_pll;
    let omega_pll = 1.0 + delta_omega / ctx.omega0_rad;
    let (omega_droop, omega_meas_rate) = if ctx.freq_filter > 0.0 {
        (state.omega_meas, (omega_pll - state.omega_meas) / ctx.freq_filter)
    } else {
        (omega_pll, 0.0)
    };
    let p_set = droop_setpoint(params.d_droop, ctx.omega_ref, omega_droop, ctx.p_ref);
    let p_command = p_set.clamp(-ctx.p_limit, ctx.p_limit);
    let rates = GflState {
        phi_pll: params.ki_pll * u_q,
        theta: delta_omega,
        omega_meas: omega_meas_rate,
        power: pi_lag_rates(state.power, p_command, params.kp_i, params.ki_i, ctx.loop_time_constant),
    };
    (rates, GflSignals { u_q, delta_omega, omega_pll, p_set, p_command })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfmState {
    /// Virtual rotor speed, per-unit.
    pub omega: f64,
    /// Angle of the realized source voltage relative to the nominal frame, rad.
    pub theta: f64,
    /// Filtered electrical power, per-unit.
    pub p_meas: f64,
    /// Voltage-loop stage of the speed-to-angle path.
    pub voltage_loop: PiLagState,
    /// Current-loop stage of the speed-to-angle path.
    pub current_loop: PiLagState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfmContext {
    pub p_ref: f64,
    pub omega_ref: f64,
    pub omega0_rad: f64,
    pub loop_time_constant: f64,
    pub p_filter: f64,
}

pub type GfmRates = GfmState;

/// `ω̇` from `M·ω̇ = (P_ref − P_meas)/ω − D·(ω − ω_ref)`.
pub fn swing_acceleration(m: f64, d: f64, p_ref: f64, p_meas: f64, omega: f64, omega_ref: f64) -> f64 {
    ((p_ref - p_meas) / omega - d * (omega - omega_ref)) / m
}

/// The VSG speed passes through the voltage- and current-loop lags before it
/// turns the source angle, so larger loop gains realize speed changes faster.
pub fn gfm_derivatives(state: &GfmState, electrical_power: f64, params: &GfmParams, ctx: &GfmContext) -> GfmRates {
    let c = ctx.loop_time_constant;
    GfmState {
        omega: swing_acceleration(params.m_inertia, params.d_damp, ctx.p_ref, state.p_meas, state.omega, ctx.omega_ref),
        theta: (state.current_loop.y - 1.0) * ctx.omega0_rad,
        p_meas: (electrical_power - state.p_meas) / ctx.p_filter,
        voltage_loop: pi_lag_rates(state.voltage_loop, state.omega, params.kp_v, params.ki_v, c),
        current_loop: pi_lag_rates(state.current_loop, state.voltage_loop.y, params.kp_i, params.ki_i, c),
    }
}
