use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

pub type BusId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Gfl,
    Gfm,
    Load,
    Passive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineStatus {
    #[default]
    Closed,
    Open,
}

/// Transmission branch; reactance and resistance in per-unit on the system base.
/// The network solution is lossless, so `r` is carried for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    pub x: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub status: LineStatus,
}

impl Line {
    pub fn connects(&self, a: BusId, b: BusId) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbrKind {
    Gfl,
    Gfm,
}

/// Static description of one inverter. Control gains are supplied
/// separately at simulation time so the model can stay immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbrUnit {
    pub name: String,
    pub kind: IbrKind,
    pub bus: BusId,
    pub p_ref: f64,
    #[serde(default)]
    pub q_ref: f64,
    pub rating: f64,
    /// Reactance between the grid-forming source and its terminal bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_coupling: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bases {
    #[serde(default = "default_power_mva")]
    pub power_mva: f64,
    #[serde(default = "default_frequency_hz")]
    pub frequency_hz: f64,
}

fn default_power_mva() -> f64 {
    1000.0
}

fn default_frequency_hz() -> f64 {
    60.0
}

impl Default for Bases {
    fn default() -> Self {
        Self { power_mva: default_power_mva(), frequency_hz: default_frequency_hz() }
    }
}

impl Bases {
    pub fn omega0_rad(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency_hz
    }
}

/// Integration settings and the time constants of the reduced control loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt_sim: f64,
    pub dt_sample: f64,
    pub horizon: f64,
    /// `c` in `T = c / K_p` for every reduced PI loop, seconds.
    pub loop_time_constant: f64,
    /// Low-pass on the measured grid-forming power, seconds.
    pub p_meas_filter: f64,
    /// Washout used to report frequency at buses without an inverter, seconds.
    pub bus_freq_filter: f64,
    /// Low-pass on the PLL frequency feeding the grid-following droop, seconds.
    /// Zero feeds the raw PLL frequency.
    pub gfl_freq_filter: f64,
    /// Grid-following power command limit as a multiple of the unit rating.
    pub gfl_saturation: f64,
    /// Default source reactance for grid-forming units without their own.
    pub gfm_coupling_reactance: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt_sim: 1e-3,
            dt_sample: 5e-3,
            horizon: 5.0,
            loop_time_constant: 0.05,
            p_meas_filter: 0.02,
            bus_freq_filter: 0.02,
            gfl_freq_filter: 0.5,
            gfl_saturation: 1.2,
            gfm_coupling_reactance: 0.1,
        }
    }
}

/// Grid description as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridModel {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub bases: Bases,
    #[serde(default)]
    pub numerics: Numerics,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<Load>,
    pub ibrs: Vec<IbrUnit>,
}

impl GridModel {
    pub fn from_json_str(text: &str) -> Result<Self, SimError> {
        let model: GridModel =
            serde_json::from_str(text).map_err(|e| SimError::InvalidModel(format!("grid file: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidModel(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn ibr(&self, name: &str) -> Option<&IbrUnit> {
        self.ibrs.iter().find(|u| u.name == name)
    }

    /// Buses hosting an inverter, in bus order.
    pub fn ibr_buses(&self) -> Vec<BusId> {
        self.buses.iter().filter(|b| matches!(b.kind, BusKind::Gfl | BusKind::Gfm)).map(|b| b.id).collect()
    }

    pub fn total_load(&self) -> f64 {
        self.loads.iter().map(|l| l.p).sum()
    }

    pub fn coupling_reactance(&self, unit: &IbrUnit) -> f64 {
        unit.x_coupling.unwrap_or(self.numerics.gfm_coupling_reactance)
    }

    /// Closed-line connectivity, optionally pretending `tripped` is open.
    pub fn is_connected_without(&self, tripped: Option<(BusId, BusId)>) -> bool {
        let index = self.bus_index();
        let n = self.buses.len();
        if n == 0 {
            return false;
        }
        let mut skip_once = tripped;
        let mut adj = vec![Vec::new(); n];
        for line in &self.lines {
            if line.status != LineStatus::Closed {
                continue;
            }
            if let Some((a, b)) = skip_once {
                if line.connects(a, b) {
                    skip_once = None;
                    continue;
                }
            }
            let (Some(&i), Some(&j)) = (index.get(&line.from), index.get(&line.to)) else {
                continue;
            };
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidModel(msg));
        if self.buses.is_empty() {
            return invalid("grid has no buses".into());
        }
        let mut ids = HashSet::new();
        for bus in &self.buses {
            if !ids.insert(bus.id) {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
        }
        let b = self.bases;
        if !(b.power_mva > 0.0 && b.frequency_hz > 0.0) {
            return invalid("bases must be positive".into());
        }
        let nu = &self.numerics;
        for (name, v) in [
            ("dt_sim", nu.dt_sim),
            ("dt_sample", nu.dt_sample),
            ("horizon", nu.horizon),
            ("loop_time_constant", nu.loop_time_constant),
            ("p_meas_filter", nu.p_meas_filter),
            ("bus_freq_filter", nu.bus_freq_filter),
            ("gfl_saturation", nu.gfl_saturation),
            ("gfm_coupling_reactance", nu.gfm_coupling_reactance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("numerics.{name} must be positive, got {v}"));
            }
        }
        if !(nu.gfl_freq_filter >= 0.0 && nu.gfl_freq_filter.is_finite()) {
            return invalid(format!("numerics.gfl_freq_filter must be non-negative, got {}", nu.gfl_freq_filter));
        }
        for (k, line) in self.lines.iter().enumerate() {
            if !ids.contains(&line.from) || !ids.contains(&line.to) {
                return invalid(format!("lines[{k}] references an unknown bus ({}-{})", line.from, line.to));
            }
            if line.from == line.to {
                return invalid(format!("lines[{k}] is a self-loop at bus {}", line.from));
            }
            if !(line.x > 0.0 && line.x.is_finite()) {
                return invalid(format!("lines[{k}] reactance must be positive, got {}", line.x));
            }
        }
        for (k, load) in self.loads.iter().enumerate() {
            if !ids.contains(&load.bus) {
                return invalid(format!("loads[{k}] references unknown bus {}", load.bus));
            }
            if !load.p.is_finite() {
                return invalid(format!("loads[{k}] power is not finite"));
            }
        }
        let mut hosted = HashMap::new();
        let mut names = HashSet::new();
        for unit in &self.ibrs {
            if !names.insert(unit.name.as_str()) {
                return invalid(format!("duplicate inverter name {}", unit.name));
            }
            let Some(bus) = self.bus(unit.bus) else {
                return invalid(format!("inverter {} references unknown bus {}", unit.name, unit.bus));
            };
            let expected = match unit.kind {
                IbrKind::Gfl => BusKind::Gfl,
                IbrKind::Gfm => BusKind::Gfm,
            };
            if bus.kind != expected {
                return invalid(format!("inverter {} sits on bus {} of kind {:?}", unit.name, unit.bus, bus.kind));
            }
            if hosted.insert(unit.bus, unit.name.as_str()).is_some() {
                return invalid(format!("bus {} hosts more than one inverter", unit.bus));
            }
            if !(unit.rating > 0.0) {
                return invalid(format!("inverter {} rating must be positive", unit.name));
            }
            if !(unit.p_ref.abs() <= unit.rating) {
                return invalid(format!("inverter {} p_ref {} exceeds rating {}", unit.name, unit.p_ref, unit.rating));
            }
            if unit.kind == IbrKind::Gfm {
                let x = self.coupling_reactance(unit);
                if !(x > 0.0 && x.is_finite()) {
                    return invalid(format!("inverter {} coupling reactance must be positive", unit.name));
                }
            }
        }
        for bus in &self.buses {
            if matches!(bus.kind, BusKind::Gfl | BusKind::Gfm) && !hosted.contains_key(&bus.id) {
                return invalid(format!("bus {} is marked {:?} but hosts no inverter", bus.id, bus.kind));
            }
        }
        if !self.ibrs.iter().any(|u| u.kind == IbrKind::Gfm) {
            return invalid("at least one grid-forming inverter is required".into());
        }
        if !self.is_connected_without(None) {
            return Err(SimError::Topology("closed-line graph is not connected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflParams {
    pub kp_pll: f64,
    pub ki_pll: f64,
    pub d_droop: f64,
    pub kp_i: f64,
    pub ki_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfmParams {
    pub m_inertia: f64,
    pub d_damp: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_i: f64,
    pub ki_i: f64,
}

/// Tunable control parameter names as they appear in catalogs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlParam {
    D,
    M,
    #[serde(rename = "K_i_PLL")]
    KiPll,
    #[serde(rename = "K_p_PLL")]
    KpPll,
    #[serde(rename = "K_i_v")]
    KiV,
    #[serde(rename = "K_p_v")]
    KpV,
    #[serde(rename = "K_i_i")]
    KiI,
    #[serde(rename = "K_p_i")]
    KpI,
}

impl ControlParam {
    pub const GFL: [ControlParam; 5] =
        [ControlParam::D, ControlParam::KiPll, ControlParam::KpPll, ControlParam::KiI, ControlParam::KpI];
    pub const GFM: [ControlParam; 6] =
        [ControlParam::D, ControlParam::M, ControlParam::KiV, ControlParam::KpV, ControlParam::KiI, ControlParam::KpI];

    pub fn for_kind(kind: IbrKind) -> &'static [ControlParam] {
        match kind {
            IbrKind::Gfl => &Self::GFL,
            IbrKind::Gfm => &Self::GFM,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlParam::D => "D",
            ControlParam::M => "M",
            ControlParam::KiPll => "K_i_PLL",
            ControlParam::KpPll => "K_p_PLL",
            ControlParam::KiV => "K_i_v",
            ControlParam::KpV => "K_p_v",
            ControlParam::KiI => "K_i_i",
            ControlParam::KpI => "K_p_i",
        }
    }
}

impl std::fmt::Display for ControlParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IbrParams {
    Gfl(GflParams),
    Gfm(GfmParams),
}

impl IbrParams {
    pub fn kind(&self) -> IbrKind {
        match self {
            IbrParams::Gfl(_) => IbrKind::Gfl,
            IbrParams::Gfm(_) => IbrKind::Gfm,
        }
    }

    /// Every gain set to `value`; a starting point for filling from a catalog.
    pub fn uniform(kind: IbrKind, value: f64) -> Self {
        match kind {
            IbrKind::Gfl => {
                IbrParams::Gfl(GflParams { kp_pll: value, ki_pll: value, d_droop: value, kp_i: value, ki_i: value })
            }
            IbrKind::Gfm => IbrParams::Gfm(GfmParams {
                m_inertia: value,
                d_damp: value,
                kp_v: value,
                ki_v: value,
                kp_i: value,
                ki_i: value,
            }),
        }
    }

    fn slot(&mut self, param: ControlParam) -> Option<&mut f64> {
        match (self, param) {
            (IbrParams::Gfl(p), ControlParam::D) => Some(&mut p.d_droop),
            (IbrParams::Gfl(p), ControlParam::KiPll) => Some(&mut p.ki_pll),
            (IbrParams::Gfl(p), ControlParam::KpPll) => Some(&mut p.kp_pll),
            (IbrParams::Gfl(p), ControlParam::KiI) => Some(&mut p.ki_i),
            (IbrParams::Gfl(p), ControlParam::KpI) => Some(&mut p.kp_i),
            (IbrParams::Gfm(p), ControlParam::D) => Some(&mut p.d_damp),
            (IbrParams::Gfm(p), ControlParam::M) => Some(&mut p.m_inertia),
            (IbrParams::Gfm(p), ControlParam::KiV) => Some(&mut p.ki_v),
            (IbrParams::Gfm(p), ControlParam::KpV) => Some(&mut p.kp_v),
            (IbrParams::Gfm(p), ControlParam::KiI) => Some(&mut p.ki_i),
            (IbrParams::Gfm(p), ControlParam::KpI) => Some(&mut p.kp_i),
            _ => None,
        }
    }

    /// `None` when the parameter does not exist for this inverter kind.
    pub fn get(&self, param: ControlParam) -> Option<f64> {
        let mut copy = *self;
        copy.slot(param).map(|v| *v)
    }

    /// Returns false when the parameter does not exist for this inverter kind.
    pub fn set(&mut self, param: ControlParam, value: f64) -> bool {
        match self.slot(param) {
            Some(v) => {
                *v = value;
                true
            }
            None => false,
        }
    }

    fn named(&self) -> Vec<(&'static str, f64)> {
        match self {
            IbrParams::Gfl(p) => vec![
                ("kp_pll", p.kp_pll),
                ("ki_pll", p.ki_pll),
                ("d_droop", p.d_droop),
                ("kp_i", p.kp_i),
                ("ki_i", p.ki_i),
            ],
            IbrParams::Gfm(p) => vec![
                ("m_inertia", p.m_inertia),
                ("d_damp", p.d_damp),
                ("kp_v", p.kp_v),
                ("ki_v", p.ki_v),
                ("kp_i", p.kp_i),
                ("ki_i", p.ki_i),
            ],
        }
    }

    /// Every gain must be strictly positive and finite.
    pub fn validate(&self, unit: &str) -> Result<(), SimError> {
        for (name, value) in self.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidParams { ibr: unit.to_string(), name: name.to_string(), value });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_params_by_kind() {
        let mut gfl =
            IbrParams::Gfl(GflParams { kp_pll: 50.0, ki_pll: 3000.0, d_droop: 1100.0, kp_i: 50.0, ki_i: 200.0 });
        assert_eq!(gfl.get(ControlParam::KiPll), Some(3000.0));
        assert_eq!(gfl.get(ControlParam::M), None);
        assert!(gfl.set(ControlParam::D, 2000.0));
        assert!(!gfl.set(ControlParam::KpV, 1.0));
        assert_eq!(gfl.get(ControlParam::D), Some(2000.0));
        for kind in [IbrKind::Gfl, IbrKind::Gfm] {
            for p in ControlParam::for_kind(kind) {
                let json = serde_json::to_string(p).unwrap();
                assert_eq!(json, format!("\"{p}\""));
            }
        }
    }

    const TOY: &str = r#"{
        "name": "t",
        "buses": [{"id": 1, "kind": "gfm"}, {"id": 2, "kind": "gfl"}, {"id": 3, "kind": "load"}],
        "lines": [{"from": 1, "to": 2, "x": 0.1}, {"from": 2, "to": 3, "x": 0.1}],
        "loads": [{"bus": 3, "p": 0.5}],
        "ibrs": [
            {"name": "A", "kind": "gfm", "bus": 1, "p_ref": 0.2, "rating": 1.0},
            {"name": "B", "kind": "gfl", "bus": 2, "p_ref": 0.3, "rating": 1.0}
        ]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let m = GridModel::from_json_str(TOY).unwrap();
        assert_eq!(m.bases.power_mva, 1000.0);
        assert_eq!(m.numerics.dt_sim, 1e-3);
        assert_eq!(m.lines[0].status, LineStatus::Closed);
        assert_eq!(m.ibr_buses(), vec![1, 2]);
    }

    #[test]
    fn rejects_disconnected() {
        let text =
            TOY.replace(r#"{"from": 2, "to": 3, "x": 0.1}"#, r#"{"from": 2, "to": 3, "x": 0.1, "status": "open"}"#);
        assert!(matches!(GridModel::from_json_str(&text), Err(SimError::Topology(_))));
    }

    #[test]
    fn rejects_bad_reactance_and_duplicate_host() {
        let text = TOY.replace(r#""x": 0.1}, {"from": 2"#, r#""x": 0.0}, {"from": 2"#);
        assert!(GridModel::from_json_str(&text).is_err());
        let text = TOY.replace(r#""bus": 2, "p_ref""#, r#""bus": 1, "p_ref""#);
        assert!(GridModel::from_json_str(&text).is_err());
    }

    #[test]
    fn rejects_missing_gfm() {
        let text = TOY
            .replace(r#"{"id": 1, "kind": "gfm"}"#, r#"{"id": 1, "kind": "passive"}"#)
            .replace(r#"{"name": "A", "kind": "gfm", "bus": 1, "p_ref": 0.2, "rating": 1.0},"#, "");
        assert!(GridModel::from_json_str(&text).is_err());
    }

    #[test]
    fn trip_connectivity() {
        let m = GridModel::from_json_str(TOY).unwrap();
        assert!(!m.is_connected_without(Some((2, 3))));
        assert!(!m.is_connected_without(Some((3, 2))));
        assert!(m.is_connected_without(Some((1, 3))));
    }

    #[test]
    fn params_must_be_positive() {
        let p = IbrParams::Gfl(GflParams { kp_pll: 50.0, ki_pll: 3000.0, d_droop: 1100.0, kp_i: 50.0, ki_i: -1.0 });
        assert!(matches!(p.validate("x"), Err(SimError::InvalidParams { .. })));
    }
}
