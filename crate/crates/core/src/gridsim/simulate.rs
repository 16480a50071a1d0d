use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::devices::{gfl_derivatives, gfm_derivatives, GflContext, GflState, GfmContext, GfmState, PiLagState};
use super::integrator::Rk4;
use super::model::{BusId, BusKind, GflParams, GfmParams, GridModel, IbrKind, IbrParams, LineStatus, Numerics};
use super::network::Network;
use super::trajectory::{FrequencyTrajectory, FrequencyUnit};
use super::SimError;

const GFL_STATES: usize = 5;
const GFM_STATES: usize = 7;
const GFM_OMEGA_RANGE: (f64, f64) = (0.8, 1.2);
const PLL_DEVIATION_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// No event; the run should hold equilibrium.
    None,
    LoadStep {
        bus: BusId,
        delta_p: f64,
    },
    LineTrip {
        from: BusId,
        to: BusId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    #[serde(flatten)]
    pub kind: DisturbanceKind,
    pub t_d: f64,
}

impl Disturbance {
    /// Validated constructor; a trip that would split the grid is refused here.
    pub fn new(kind: DisturbanceKind, t_d: f64, model: &GridModel) -> Result<Self, SimError> {
        let d = Self { kind, t_d };
        d.validate(model)?;
        Ok(d)
    }

    pub fn none(t_d: f64) -> Self {
        Self { kind: DisturbanceKind::None, t_d }
    }

    pub fn validate(&self, model: &GridModel) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidDisturbance(msg));
        if !(self.t_d >= 0.0 && self.t_d.is_finite()) {
            return bad(format!("occurrence time must be non-negative, got {}", self.t_d));
        }
        match self.kind {
            DisturbanceKind::None => Ok(()),
            DisturbanceKind::LoadStep { bus, delta_p } => {
                if model.bus(bus).is_none() {
                    return bad(format!("load step at unknown bus {bus}"));
                }
                if !delta_p.is_finite() {
                    return bad("load step magnitude is not finite".into());
                }
                Ok(())
            }
            DisturbanceKind::LineTrip { from, to } => {
                if find_closed_line(model, &line_statuses(model), from, to).is_none() {
                    return bad(format!("no closed line between buses {from} and {to}"));
                }
                if !model.is_connected_without(Some((from, to))) {
                    return bad(format!("tripping line {from}-{to} would disconnect the grid"));
                }
                Ok(())
            }
        }
    }
}

fn line_statuses(model: &GridModel) -> Vec<bool> {
    model.lines.iter().map(|l| l.status == LineStatus::Closed).collect()
}

fn find_closed_line(model: &GridModel, closed: &[bool], a: BusId, b: BusId) -> Option<usize> {
    model.lines.iter().zip(closed).position(|(l, &c)| c && l.connects(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt_sim: f64,
    pub dt_sample: f64,
    pub horizon: f64,
}

impl From<&Numerics> for SimSettings {
    fn from(n: &Numerics) -> Self {
        Self { dt_sim: n.dt_sim, dt_sample: n.dt_sample, horizon: n.horizon }
    }
}

impl SimSettings {
    /// Total integration steps and steps per sample.
    pub fn step_counts(&self) -> Result<(usize, usize), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSettings(msg));
        for (name, v) in [("dt_sim", self.dt_sim), ("dt_sample", self.dt_sample), ("horizon", self.horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let every = self.dt_sample / self.dt_sim;
        if (every - every.round()).abs() > 1e-9 * every || every.round() < 1.0 {
            return bad(format!("dt_sample {} is not an integer multiple of dt_sim {}", self.dt_sample, self.dt_sim));
        }
        let steps = self.horizon / self.dt_sim;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return bad(format!("horizon {} is not a multiple of dt_sim {}", self.horizon, self.dt_sim));
        }
        Ok((steps.round() as usize, every.round() as usize))
    }

    pub fn sample_count(&self) -> Result<usize, SimError> {
        let (steps, every) = self.step_counts()?;
        Ok(steps / every + 1)
    }
}

#[derive(Debug, Clone)]
struct GflSlot {
    name: String,
    bus: usize,
    offset: usize,
    p_ref: f64,
    p_limit: f64,
    params: GflParams,
}

#[derive(Debug, Clone)]
struct GfmSlot {
    name: String,
    bus: usize,
    offset: usize,
    p_ref: f64,
    rating: f64,
    params: GfmParams,
}

#[derive(Debug, Clone, Copy)]
enum Reporter {
    Gfl(usize),
    Gfm(usize),
    Washout(usize),
}

/// Composite right-hand side: device dynamics coupled through the network.
#[derive(Debug, Clone)]
struct Plant {
    numerics: Numerics,
    omega0: f64,
    bus_ids: Vec<BusId>,
    gfl: Vec<GflSlot>,
    gfm: Vec<GfmSlot>,
    washout: Vec<(usize, usize)>,
    reporters: Vec<Reporter>,
    load: Vec<f64>,
    network: Network,
    time: f64,
    injection: Vec<f64>,
    rhs: Vec<f64>,
    angles: Vec<f64>,
    gfm_angles: Vec<f64>,
    gfm_power: Vec<f64>,
}

impl Plant {
    fn gfl_state(y: &[f64], o: usize) -> GflState {
        GflState {
            phi_pll: y[o],
            theta: y[o + 1],
            omega_meas: y[o + 2],
            power: PiLagState { y: y[o + 3], z: y[o + 4] },
        }
    }

    fn write_gfl(dy: &mut [f64], o: usize, s: &GflState) {
        dy[o..o + GFL_STATES].copy_from_slice(&[s.phi_pll, s.theta, s.omega_meas, s.power.y, s.power.z]);
    }

    fn gfm_state(y: &[f64], o: usize) -> GfmState {
        GfmState {
            omega: y[o],
            theta: y[o + 1],
            p_meas: y[o + 2],
            voltage_loop: PiLagState { y: y[o + 3], z: y[o + 4] },
            current_loop: PiLagState { y: y[o + 5], z: y[o + 6] },
        }
    }

    fn write_gfm(dy: &mut [f64], o: usize, s: &GfmState) {
        dy[o..o + GFM_STATES].copy_from_slice(&[
            s.omega,
            s.theta,
            s.p_meas,
            s.voltage_loop.y,
            s.voltage_loop.z,
            s.current_loop.y,
            s.current_loop.z,
        ]);
    }

    fn gfl_ctx(&self, slot: &GflSlot) -> GflContext {
        GflContext {
            p_ref: slot.p_ref,
            omega_ref: 1.0,
            omega0_rad: self.omega0,
            loop_time_constant: self.numerics.loop_time_constant,
            freq_filter: self.numerics.gfl_freq_filter,
            p_limit: slot.p_limit,
        }
    }

    fn gfm_ctx(&self, slot: &GfmSlot) -> GfmContext {
        GfmContext {
            p_ref: slot.p_ref,
            omega_ref: 1.0,
            omega0_rad: self.omega0,
            loop_time_constant: self.numerics.loop_time_constant,
            p_filter: self.numerics.p_meas_filter,
        }
    }

    fn solve_network(&mut self, y: &[f64]) {
        for (inj, load) in self.injection.iter_mut().zip(&self.load) {
            *inj = -load;
        }
        for slot in &self.gfl {
            self.injection[slot.bus] += y[slot.offset + 3];
        }
        for (a, slot) in self.gfm_angles.iter_mut().zip(&self.gfm) {
            *a = y[slot.offset + 1];
        }
        self.network.solve_into(
            &self.gfm_angles,
            &self.injection,
            &mut self.rhs,
            &mut self.angles,
            &mut self.gfm_power,
        );
    }

    fn derivatives(&mut self, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        self.solve_network(y);
        for slot in &self.gfl {
            let state = Self::gfl_state(y, slot.offset);
            let (rates, signals) = gfl_derivatives(&state, self.angles[slot.bus], &slot.params, &self.gfl_ctx(slot));
            if !(signals.delta_omega.abs() <= PLL_DEVIATION_LIMIT * self.omega0) {
                return Err(SimError::Divergence {
                    time: self.time,
                    location: format!("bus {} ({})", self.bus_ids[slot.bus], slot.name),
                    state: "pll_delta_omega".into(),
                    value: signals.delta_omega,
                });
            }
            Self::write_gfl(dy, slot.offset, &rates);
        }
        for (k, slot) in self.gfm.iter().enumerate() {
            let state = Self::gfm_state(y, slot.offset);
            let rates = gfm_derivatives(&state, self.gfm_power[k], &slot.params, &self.gfm_ctx(slot));
            Self::write_gfm(dy, slot.offset, &rates);
        }
        let tw = self.numerics.bus_freq_filter;
        for &(bus, offset) in &self.washout {
            dy[offset] = (self.angles[bus] - y[offset]) / tw;
        }
        Ok(())
    }

    fn check_state(&self, y: &[f64]) -> Result<(), SimError> {
        for slot in &self.gfm {
            let omega = y[slot.offset];
            if !(GFM_OMEGA_RANGE.0..=GFM_OMEGA_RANGE.1).contains(&omega) {
                return Err(SimError::Divergence {
                    time: self.time,
                    location: format!("bus {} ({})", self.bus_ids[slot.bus], slot.name),
                    state: "gfm_omega".into(),
                    value: omega,
                });
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SimError::Divergence {
                time: self.time,
                location: format!("state index {i}"),
                state: "non_finite".into(),
                value: y[i],
            });
        }
        Ok(())
    }

    fn frequencies_pu(&mut self, y: &[f64], out: &mut [f64]) {
        self.solve_network(y);
        for (value, reporter) in out.iter_mut().zip(&self.reporters) {
            *value = match *reporter {
                Reporter::Gfl(k) => {
                    let slot = &self.gfl[k];
                    let s = Self::gfl_state(y, slot.offset);
                    let u_q = super::devices::pll_error(self.angles[slot.bus], s.theta);
                    1.0 + (slot.params.kp_pll * u_q + s.phi_pll) / self.omega0
                }
                Reporter::Gfm(k) => y[self.gfm[k].offset],
                Reporter::Washout(bus) => {
                    let offset = self.washout.iter().find(|(b, _)| *b == bus).map(|(_, o)| *o).unwrap_or_default();
                    1.0 + (self.angles[bus] - y[offset]) / (self.numerics.bus_freq_filter * self.omega0)
                }
            };
        }
    }
}

/// Steady operating point returned by [`init_equilibrium`].
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: Vec<f64>,
    pub bus_angles: Vec<f64>,
    pub gfm_angles: Vec<f64>,
    /// Grid-forming power references after absorbing the load imbalance.
    pub gfm_dispatch: Vec<f64>,
}

/// Stateful stepping interface over one model and parameter set.
#[derive(Debug, Clone)]
pub struct Simulator<'m> {
    model: &'m GridModel,
    plant: Plant,
    closed: Vec<bool>,
    rk4: Rk4,
    n_states: usize,
}

impl<'m> Simulator<'m> {
    /// `params` follows the order of `model.ibrs`.
    pub fn new(model: &'m GridModel, params: &[IbrParams]) -> Result<Self, SimError> {
        if params.len() != model.ibrs.len() {
            return Err(SimError::InvalidModel(format!(
                "expected {} parameter sets, got {}",
                model.ibrs.len(),
                params.len()
            )));
        }
        let index = model.bus_index();
        let mut offset = 0;
        let mut gfl = Vec::new();
        let mut gfm = Vec::new();
        let mut owner = vec![None; model.buses.len()];
        for (unit, p) in model.ibrs.iter().zip(params) {
            p.validate(&unit.name)?;
            let bus = index[&unit.bus];
            match (unit.kind, p) {
                (IbrKind::Gfl, IbrParams::Gfl(params)) => {
                    owner[bus] = Some(Reporter::Gfl(gfl.len()));
                    gfl.push(GflSlot {
                        name: unit.name.clone(),
                        bus,
                        offset,
                        p_ref: unit.p_ref,
                        p_limit: model.numerics.gfl_saturation * unit.rating,
                        params: *params,
                    });
                    offset += GFL_STATES;
                }
                (IbrKind::Gfm, IbrParams::Gfm(params)) => {
                    owner[bus] = Some(Reporter::Gfm(gfm.len()));
                    gfm.push(GfmSlot {
                        name: unit.name.clone(),
                        bus,
                        offset,
                        p_ref: unit.p_ref,
                        rating: unit.rating,
                        params: *params,
                    });
                    offset += GFM_STATES;
                }
                (kind, _) => {
                    return Err(SimError::InvalidModel(format!(
                        "inverter {} is {kind:?} but was given {:?} parameters",
                        unit.name,
                        p.kind()
                    )))
                }
            }
        }
        let mut washout = Vec::new();
        let reporters = model
            .buses
            .iter()
            .enumerate()
            .map(|(i, bus)| match (bus.kind, owner[i]) {
                (BusKind::Gfl | BusKind::Gfm, Some(r)) => r,
                _ => {
                    washout.push((i, offset));
                    offset += 1;
                    Reporter::Washout(i)
                }
            })
            .collect();
        let mut load = vec![0.0; model.buses.len()];
        for l in &model.loads {
            load[index[&l.bus]] += l.p;
        }
        let closed = line_statuses(model);
        let network = Network::new(model, &closed)?;
        let n = model.buses.len();
        let n_gfm = gfm.len();
        let mut plant = Plant {
            numerics: model.numerics,
            omega0: model.bases.omega0_rad(),
            bus_ids: model.buses.iter().map(|b| b.id).collect(),
            gfl,
            gfm,
            washout,
            reporters,
            load,
            network,
            time: 0.0,
            injection: vec![0.0; n],
            rhs: vec![0.0; n],
            angles: vec![0.0; n],
            gfm_angles: vec![0.0; n_gfm],
            gfm_power: vec![0.0; n_gfm],
        };
        balance_dispatch(&mut plant)?;
        Ok(Self { model, plant, closed, rk4: Rk4::new(offset), n_states: offset })
    }

    pub fn state_len(&self) -> usize {
        self.n_states
    }

    pub fn time(&self) -> f64 {
        self.plant.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.plant.time = t;
    }

    pub fn bus_ids(&self) -> &[BusId] {
        &self.plant.bus_ids
    }

    pub fn network(&self) -> &Network {
        &self.plant.network
    }

    /// Steady state with every frequency at nominal: network angles from a
    /// DC power flow with the grid-forming sources as slack, PLLs locked on
    /// their bus angles, every loop settled on its dispatch.
    pub fn equilibrium(&self) -> Result<Equilibrium, SimError> {
        let p = &self.plant;
        let n = p.bus_ids.len();
        let g = p.gfm.len();
        // extended nodes: buses, then grid-forming internal nodes; internal node 0 is the reference
        let size = n + g;
        let mut lap = DMatrix::<f64>::zeros(size, size);
        let mut add = |i: usize, j: usize, y: f64| {
            lap[(i, i)] += y;
            lap[(j, j)] += y;
            lap[(i, j)] -= y;
            lap[(j, i)] -= y;
        };
        let index = self.model.bus_index();
        for (line, _) in self.model.lines.iter().zip(&self.closed).filter(|(_, &c)| c) {
            add(index[&line.from], index[&line.to], 1.0 / line.x);
        }
        let gfm_units: Vec<_> = self.model.ibrs.iter().filter(|u| u.kind == IbrKind::Gfm).collect();
        for (k, (slot, unit)) in p.gfm.iter().zip(&gfm_units).enumerate() {
            add(slot.bus, n + k, 1.0 / self.model.coupling_reactance(unit));
        }
        let mut injection = vec![0.0; size];
        for (i, l) in p.load.iter().enumerate() {
            injection[i] -= l;
        }
        for slot in &p.gfl {
            injection[slot.bus] += slot.p_ref;
        }
        for (k, slot) in p.gfm.iter().enumerate() {
            injection[n + k] += slot.p_ref;
        }
        let keep: Vec<usize> = (0..size).filter(|&i| i != n).collect();
        let reduced = lap.select_rows(&keep).select_columns(&keep);
        let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&i| injection[i]));
        let solution = reduced
            .cholesky()
            .ok_or_else(|| SimError::Topology("equilibrium power flow is singular".into()))?
            .solve(&rhs);
        let mut angles = vec![0.0; size];
        for (&i, v) in keep.iter().zip(solution.iter()) {
            angles[i] = *v;
        }
        let bus_angles = angles[..n].to_vec();
        let gfm_angles = angles[n..].to_vec();

        let mut state = vec![0.0; self.n_states];
        for slot in &p.gfl {
            let s = GflState {
                phi_pll: 0.0,
                theta: bus_angles[slot.bus],
                omega_meas: 1.0,
                power: PiLagState::settled(slot.p_ref),
            };
            Plant::write_gfl(&mut state, slot.offset, &s);
        }
        for (slot, &delta) in p.gfm.iter().zip(&gfm_angles) {
            let s = GfmState {
                omega: 1.0,
                theta: delta,
                p_meas: slot.p_ref,
                voltage_loop: PiLagState::settled(1.0),
                current_loop: PiLagState::settled(1.0),
            };
            Plant::write_gfm(&mut state, slot.offset, &s);
        }
        for &(bus, offset) in &p.washout {
            state[offset] = bus_angles[bus];
        }
        Ok(Equilibrium { state, bus_angles, gfm_angles, gfm_dispatch: p.gfm.iter().map(|s| s.p_ref).collect() })
    }

    pub fn derivatives(&mut self, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        self.plant.derivatives(y, dy)
    }

    /// One RK4 step of length `dt`, then the validity envelope check.
    pub fn step(&mut self, y: &mut [f64], dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidSettings(format!("dt_sim must be positive, got {dt}")));
        }
        let plant = &mut self.plant;
        self.rk4.step(y, dt, |y, dy| plant.derivatives(y, dy))?;
        plant.time += dt;
        plant.check_state(y)
    }

    pub fn apply(&mut self, disturbance: &Disturbance) -> Result<(), SimError> {
        match disturbance.kind {
            DisturbanceKind::None => Ok(()),
            DisturbanceKind::LoadStep { bus, delta_p } => {
                let i = self.model.bus_index()[&bus];
                self.plant.load[i] += delta_p;
                Ok(())
            }
            DisturbanceKind::LineTrip { from, to } => {
                let k = find_closed_line(self.model, &self.closed, from, to)
                    .ok_or_else(|| SimError::InvalidDisturbance(format!("no closed line between {from} and {to}")))?;
                self.closed[k] = false;
                self.plant.network = Network::new(self.model, &self.closed)?;
                Ok(())
            }
        }
    }

    /// Reported frequency at every bus, per-unit, in bus order.
    pub fn bus_frequencies(&mut self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.plant.bus_ids.len()];
        self.plant.frequencies_pu(y, &mut out);
        out
    }
}

/// Spreads the gap between load and dispatched inverter power over the
/// grid-forming units in proportion to their ratings.
fn balance_dispatch(p: &mut Plant) -> Result<(), SimError> {
    let load: f64 = p.load.iter().sum();
    let dispatched: f64 = p.gfl.iter().map(|s| s.p_ref).sum::<f64>() + p.gfm.iter().map(|s| s.p_ref).sum::<f64>();
    let gap = load - dispatched;
    let total_rating: f64 = p.gfm.iter().map(|s| s.rating).sum();
    for slot in &mut p.gfm {
        slot.p_ref += gap * slot.rating / total_rating;
        if slot.p_ref.abs() > slot.rating {
            return Err(SimError::InfeasibleDispatch {
                ibr: slot.name.clone(),
                required: slot.p_ref,
                rating: slot.rating,
            });
        }
    }
    Ok(())
}

pub fn init_equilibrium(model: &GridModel, params: &[IbrParams]) -> Result<Equilibrium, SimError> {
    Simulator::new(model, params)?.equilibrium()
}

/// Runs `model` from equilibrium over `[0, horizon]`, applying `disturbance`
/// at the first integration step at or after its occurrence time. Samples
/// taken at that instant already see the event. Frequencies are reported in Hz.
pub fn simulate(
    model: &GridModel,
    params: &[IbrParams],
    disturbance: &Disturbance,
    settings: &SimSettings,
) -> Result<FrequencyTrajectory, SimError> {
    disturbance.validate(model)?;
    let (steps, every) = settings.step_counts()?;
    if disturbance.t_d > settings.horizon {
        return Err(SimError::InvalidDisturbance(format!(
            "occurrence time {} is past the horizon {}",
            disturbance.t_d, settings.horizon
        )));
    }
    let event_step = (disturbance.t_d / settings.dt_sim - 1e-9).ceil().max(0.0) as usize;
    let mut sim = Simulator::new(model, params)?;
    let mut y = sim.equilibrium()?.state;
    let f0 = model.bases.frequency_hz;
    let n_bus = model.buses.len();
    let mut series = vec![Vec::with_capacity(steps / every + 1); n_bus];
    for i in 0..=steps {
        sim.set_time(i as f64 * settings.dt_sim);
        if i == event_step {
            sim.apply(disturbance)?;
        }
        if i % every == 0 {
            for (s, f) in series.iter_mut().zip(sim.bus_frequencies(&y)) {
                s.push(f * f0);
            }
        }
        if i < steps {
            sim.step(&mut y, settings.dt_sim)?;
        }
    }
    Ok(FrequencyTrajectory {
        dt: every as f64 * settings.dt_sim,
        t_start: 0.0,
        horizon: settings.horizon,
        unit: FrequencyUnit::Hz,
        nominal: f0,
        bus_ids: sim.bus_ids().to_vec(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn island(delta_load: f64) -> (GridModel, Vec<IbrParams>) {
        let model = GridModel::from_json_str(&format!(
            r#"{{
            "buses": [{{"id": 1, "kind": "gfm"}}, {{"id": 2, "kind": "load"}}],
            "lines": [{{"from": 1, "to": 2, "x": 0.1}}],
            "loads": [{{"bus": 2, "p": {delta_load}}}],
            "ibrs": [{{"name": "G", "kind": "gfm", "bus": 1, "p_ref": 0.5, "rating": 1.0, "x_coupling": 0.05}}]
        }}"#
        ))
        .unwrap();
        let params = vec![IbrParams::Gfm(GfmParams {
            m_inertia: 10.0,
            d_damp: 1100.0,
            kp_v: 10.0,
            ki_v: 40.0,
            kp_i: 2.5,
            ki_i: 12.5,
        })];
        (model, params)
    }

    #[test]
    fn two_bus_equilibrium_angles() {
        let (model, params) = island(0.5);
        let eq = init_equilibrium(&model, &params).unwrap();
        assert!((eq.bus_angles[0] - eq.bus_angles[1] - 0.05).abs() < 1e-12);
        assert_eq!(eq.gfm_dispatch, vec![0.5]);
    }

    #[test]
    fn zero_load_gives_flat_angles() {
        let (mut model, params) = island(0.0);
        model.ibrs[0].p_ref = 0.0;
        let eq = init_equilibrium(&model, &params).unwrap();
        assert!(eq.bus_angles.iter().chain(&eq.gfm_angles).all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn slack_absorbs_imbalance_or_fails() {
        let (model, params) = island(0.8);
        let eq = init_equilibrium(&model, &params).unwrap();
        assert!((eq.gfm_dispatch[0] - 0.8).abs() < 1e-12);
        let (model, params) = island(1.5);
        assert!(matches!(init_equilibrium(&model, &params), Err(SimError::InfeasibleDispatch { .. })));
    }

    #[test]
    fn equilibrium_has_zero_derivatives_and_steps_in_place() {
        let (model, params) = island(0.5);
        let mut sim = Simulator::new(&model, &params).unwrap();
        let mut y = sim.equilibrium().unwrap().state;
        let mut dy = vec![1.0; y.len()];
        sim.derivatives(&y, &mut dy).unwrap();
        assert!(dy.iter().all(|d| d.abs() < 1e-9), "{dy:?}");
        let before = y.clone();
        sim.step(&mut y, 1e-3).unwrap();
        for (a, b) in y.iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_parameter_kind_is_rejected() {
        let (model, _) = island(0.5);
        let params =
            vec![IbrParams::Gfl(GflParams { kp_pll: 50.0, ki_pll: 3000.0, d_droop: 1100.0, kp_i: 50.0, ki_i: 200.0 })];
        assert!(Simulator::new(&model, &params).is_err());
        assert!(Simulator::new(&model, &[]).is_err());
    }

    #[test]
    fn settings_validation() {
        let ok = SimSettings { dt_sim: 1e-3, dt_sample: 5e-3, horizon: 5.0 };
        assert_eq!(ok.step_counts().unwrap(), (5000, 5));
        assert_eq!(ok.sample_count().unwrap(), 1001);
        assert!(SimSettings { dt_sample: 2.5e-3, dt_sim: 1e-3, ..ok }.step_counts().is_err());
        assert!(SimSettings { dt_sim: 0.0, ..ok }.step_counts().is_err());
    }

    #[test]
    fn disturbance_validation() {
        let (model, _) = island(0.5);
        assert!(Disturbance::new(DisturbanceKind::LoadStep { bus: 9, delta_p: 0.1 }, 1.0, &model).is_err());
        assert!(Disturbance::new(DisturbanceKind::LineTrip { from: 1, to: 2 }, 1.0, &model).is_err());
        assert!(Disturbance::new(DisturbanceKind::LoadStep { bus: 2, delta_p: 0.1 }, -1.0, &model).is_err());
        assert!(Disturbance::new(DisturbanceKind::LoadStep { bus: 2, delta_p: 0.1 }, 1.0, &model).is_ok());
    }

    #[test]
    fn disturbance_json_shape() {
        let d: Disturbance =
            serde_json::from_str(r#"{"kind": "line_trip", "from": 18, "to": 19, "t_d": 1.0}"#).unwrap();
        assert_eq!(d.kind, DisturbanceKind::LineTrip { from: 18, to: 19 });
        assert_eq!(d.t_d, 1.0);
    }
}
