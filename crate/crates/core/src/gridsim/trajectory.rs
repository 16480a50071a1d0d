use std::io::Write;

use serde::{Deserialize, Serialize};

use super::format_sig;
use super::model::BusId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    Hz,
    PerUnit,
}

/// Per-bus frequency samples on the uniform grid `t_start + k·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrajectory {
    pub dt: f64,
    pub t_start: f64,
    pub horizon: f64,
    pub unit: FrequencyUnit,
    pub nominal: f64,
    pub bus_ids: Vec<BusId>,
    pub series: Vec<Vec<f64>>,
}

impl FrequencyTrajectory {
    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn bus(&self, id: BusId) -> Option<&[f64]> {
        self.bus_ids.iter().position(|&b| b == id).map(|i| self.series[i].as_slice())
    }

    /// Largest `|f − nominal|` over all buses and samples, in the trajectory unit.
    pub fn max_deviation(&self) -> f64 {
        self.series.iter().flatten().map(|v| (v - self.nominal).abs()).fold(0.0, f64::max)
    }

    /// Same samples expressed per-unit of nominal.
    pub fn to_per_unit(&self) -> FrequencyTrajectory {
        if self.unit == FrequencyUnit::PerUnit {
            return self.clone();
        }
        FrequencyTrajectory {
            unit: FrequencyUnit::PerUnit,
            nominal: 1.0,
            series: self.series.iter().map(|s| s.iter().map(|v| v / self.nominal).collect()).collect(),
            ..self.clone()
        }
    }

    /// `t,bus_<id>,...` with 9 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.bus_ids.iter().map(|id| format!("bus_{id}")));
        writer.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(self.series.len() + 1);
            row.push(format_sig(self.time(k), 9));
            row.extend(self.series.iter().map(|s| format_sig(s[k], 9)));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}
