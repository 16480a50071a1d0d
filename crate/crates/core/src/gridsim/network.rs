//! Quasi-static lossless network: `P = Δθ / x` on every closed branch.
//!
//! Grid-forming sources sit behind a coupling reactance and act as angle
//! boundary conditions; every other injection (grid-following output,
//! loads) is a known power. The bus susceptance matrix is therefore the
//! line Laplacian plus `1/x_c` on grid-forming buses, which is positive
//! definite when every connected component holds a grid-forming unit.
//! It is inverted once per topology.

use nalgebra::DMatrix;

use super::model::{GridModel, IbrKind, LineStatus};
use super::SimError;

#[derive(Debug, Clone)]
pub struct Network {
    susceptance: DMatrix<f64>,
    inverse: DMatrix<f64>,
    gfm_bus: Vec<usize>,
    gfm_admittance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub bus_angles: Vec<f64>,
    pub gfm_power: Vec<f64>,
}

impl Network {
    /// Builds the network for the model with its line statuses overridden
    /// by `closed` (one flag per line).
    pub fn new(model: &GridModel, closed: &[bool]) -> Result<Self, SimError> {
        if closed.len() != model.lines.len() {
            return Err(SimError::InvalidModel(format!(
                "expected {} line statuses, got {}",
                model.lines.len(),
                closed.len()
            )));
        }
        let index = model.bus_index();
        let n = model.buses.len();
        let mut b = DMatrix::<f64>::zeros(n, n);
        for (line, _) in model.lines.iter().zip(closed).filter(|(_, &c)| c) {
            let (i, j) = (index[&line.from], index[&line.to]);
            let y = 1.0 / line.x;
            b[(i, i)] += y;
            b[(j, j)] += y;
            b[(i, j)] -= y;
            b[(j, i)] -= y;
        }
        if !connected(&b) {
            return Err(SimError::Topology("closed-line graph is not connected".into()));
        }
        let mut gfm_bus = Vec::new();
        let mut gfm_admittance = Vec::new();
        for unit in model.ibrs.iter().filter(|u| u.kind == IbrKind::Gfm) {
            let i = index[&unit.bus];
            let y = 1.0 / model.coupling_reactance(unit);
            gfm_bus.push(i);
            gfm_admittance.push(y);
        }
        let mut shunted = b.clone();
        for (&i, &y) in gfm_bus.iter().zip(&gfm_admittance) {
            shunted[(i, i)] += y;
        }
        let inverse = shunted
            .clone()
            .cholesky()
            .ok_or_else(|| SimError::Topology("bus susceptance matrix is singular".into()))?
            .inverse();
        Ok(Self { susceptance: shunted, inverse, gfm_bus, gfm_admittance })
    }

    /// Builds the network with the statuses stored in the model.
    pub fn from_model(model: &GridModel) -> Result<Self, SimError> {
        let closed: Vec<bool> = model.lines.iter().map(|l| l.status == LineStatus::Closed).collect();
        Self::new(model, &closed)
    }

    pub fn bus_count(&self) -> usize {
        self.susceptance.nrows()
    }

    /// Bus susceptance matrix including the grid-forming source admittances.
    pub fn susceptance(&self) -> &DMatrix<f64> {
        &self.susceptance
    }

    pub fn solve(&self, gfm_angles: &[f64], bus_injection: &[f64]) -> NetworkSolution {
        let mut bus_angles = vec![0.0; self.bus_count()];
        let mut gfm_power = vec![0.0; self.gfm_bus.len()];
        let mut rhs = vec![0.0; self.bus_count()];
        self.solve_into(gfm_angles, bus_injection, &mut rhs, &mut bus_angles, &mut gfm_power);
        NetworkSolution { bus_angles, gfm_power }
    }

    /// Allocation-free form of [`solve`](Self::solve); `rhs` is scratch space.
    pub fn solve_into(
        &self,
        gfm_angles: &[f64],
        bus_injection: &[f64],
        rhs: &mut [f64],
        bus_angles: &mut [f64],
        gfm_power: &mut [f64],
    ) {
        let n = self.bus_count();
        rhs[..n].copy_from_slice(&bus_injection[..n]);
        for ((&i, &y), &delta) in self.gfm_bus.iter().zip(&self.gfm_admittance).zip(gfm_angles) {
            rhs[i] += y * delta;
        }
        bus_angles[..n].fill(0.0);
        for (j, column) in self.inverse.column_iter().enumerate() {
            let r = rhs[j];
            if r != 0.0 {
                for (a, &c) in bus_angles.iter_mut().zip(column.iter()) {
                    *a += c * r;
                }
            }
        }
        for (k, ((&i, &y), &delta)) in self.gfm_bus.iter().zip(&self.gfm_admittance).zip(gfm_angles).enumerate() {
            gfm_power[k] = y * (delta - bus_angles[i]);
        }
    }
}

fn connected(laplacian: &DMatrix<f64>) -> bool {
    let n = laplacian.nrows();
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if j != i && laplacian[(i, j)] != 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
