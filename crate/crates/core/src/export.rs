//! Run directories and the CSV/JSON artifacts written into them.
//!
//! ```text
//! out/<timestamp>-<seed>/
//!   manifest.json  iterations.csv  params_trend.csv  scenario_values.csv
//!   final_params.json  checkpoints/  trajectories/
//! ```
//!
//! Floats in the iteration CSVs use the shortest representation that parses
//! back to the same bits, so two logs can be compared byte for byte once the
//! `wall_ms` column is dropped.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::gridsim::FrequencyTrajectory;
use crate::orchestrator::{DecisionSpace, IterationRecord, RunOutcome, StopReason};

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates `out/<UTC timestamp>-<seed>`, adding `-2`, `-3`, … on collision.
    pub fn create(out: impl AsRef<Path>, seed: u64) -> io::Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = out.as_ref().join(format!("{stamp}-{seed}"));
        let mut root = base.clone();
        let mut n = 1;
        while root.exists() {
            n += 1;
            root = PathBuf::from(format!("{}-{n}", base.display()));
        }
        fs::create_dir_all(root.join("checkpoints"))?;
        fs::create_dir_all(root.join("trajectories"))?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn trajectories(&self) -> PathBuf {
        self.root.join("trajectories")
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// `k,f,grad_norm,eta,r,wall_ms`, one row per iteration.
pub fn write_iterations<W: io::Write>(out: W, records: &[IterationRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "f", "grad_norm", "eta", "r", "wall_ms"]).map_err(csv_err)?;
    for rec in records {
        w.write_record([
            rec.k.to_string(),
            opt(rec.f),
            rec.grad_norm.to_string(),
            rec.eta.to_string(),
            rec.r.to_string(),
            format!("{:.3}", rec.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

/// Physical parameter values per iteration, one column per named parameter.
/// The final iterate is appended as row `K + 1`.
pub fn write_params_trend<W: io::Write>(
    out: W,
    space: &DecisionSpace,
    records: &[IterationRecord],
    final_x: &[f64],
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend(space.names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let last = records.last().map_or(1, |r| r.k + 1);
    let rows = records.iter().map(|r| (r.k, r.x.as_slice())).chain(std::iter::once((last, final_x)));
    for (k, x) in rows {
        let mut row = vec![k.to_string()];
        row.extend(space.denormalize(x).iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

/// Per-scenario objective values of the logged iterates.
pub fn write_scenario_values<W: io::Write>(out: W, names: &[String], records: &[IterationRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for rec in records.iter().filter(|r| !r.scenario_values.is_empty()) {
        let mut row = vec![rec.k.to_string()];
        row.extend(rec.scenario_values.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &FrequencyTrajectory) -> io::Result<()> {
    traj.write_csv(fs::File::create(path)?).map_err(csv_err)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text)
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterSlot {
    pub index: usize,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSlot {
    pub fn all(space: &DecisionSpace) -> Vec<Self> {
        space
            .names
            .iter()
            .enumerate()
            .map(|(index, name)| ParameterSlot {
                index,
                name: name.clone(),
                lower: space.bounds.lower()[index],
                upper: space.bounds.upper()[index],
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub created: String,
    pub config_path: PathBuf,
    /// Effective configuration after command-line overrides.
    pub config: RunConfig,
    pub overrides: Vec<String>,
    pub seed: u64,
    pub parallelism: usize,
    pub config_hash: String,
    pub resumed_from: Option<PathBuf>,
    pub parameters: Vec<ParameterSlot>,
    pub scenarios: Vec<String>,
    pub stop: StopReason,
    pub iterations: usize,
    pub simulations: usize,
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
}

impl Manifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config_path: &Path,
        config: &RunConfig,
        overrides: Vec<String>,
        parallelism: usize,
        space: &DecisionSpace,
        scenarios: Vec<String>,
        outcome: &RunOutcome,
        resumed_from: Option<PathBuf>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created: chrono::Utc::now().to_rfc3339(),
            config_path: config_path.to_path_buf(),
            config: config.clone(),
            overrides,
            seed: config.seed,
            parallelism,
            config_hash: outcome.config_hash.clone(),
            resumed_from,
            parameters: ParameterSlot::all(space),
            scenarios,
            stop: outcome.stop,
            iterations: outcome.records.len(),
            simulations: outcome.total_simulations(),
            initial_objective: outcome.records.first().and_then(|r| r.f),
            final_objective: outcome.final_objective,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zo::BoxBounds;

    fn record(k: u64, x: Vec<f64>) -> IterationRecord {
        IterationRecord {
            k,
            f: Some(0.1 * k as f64),
            scenario_values: vec![0.1 * k as f64],
            x,
            grad_norm: 1.5,
            eta: 0.1,
            r: 0.1,
            step_norm: 0.0,
            simulations: 5,
            wall_ms: 12.3456,
        }
    }

    #[test]
    fn iteration_log_shape() {
        let mut buf = Vec::new();
        write_iterations(&mut buf, &[record(1, vec![0.0]), record(2, vec![0.5])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,f,grad_norm,eta,r,wall_ms");
        assert_eq!(lines[2], "2,0.2,1.5,0.1,0.1,12.346");
    }

    #[test]
    fn trend_rows_are_physical() {
        let space = DecisionSpace::new(vec!["G.M".into()], BoxBounds::new(vec![8.0], vec![30.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_params_trend(&mut buf, &space, &[record(1, vec![0.0]), record(2, vec![0.5])], &[1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k,G.M\n1,8\n2,19\n3,30\n");
    }

    #[test]
    fn run_dirs_do_not_collide() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), 4).unwrap();
        let b = RunDir::create(tmp.path(), 4).unwrap();
        assert_ne!(a.path(), b.path());
        assert!(a.checkpoints().is_dir() && b.trajectories().is_dir());
        assert!(a.path().file_name().unwrap().to_str().unwrap().contains("-4"));
    }
}
