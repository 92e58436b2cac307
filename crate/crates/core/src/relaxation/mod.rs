//! Grid discretisation of `E_p`, `E_inf` and `Lip` on planar boxes, a Newton
//! solver for the discrete p-Dirichlet problem, the p-sweep of the
//! renormalised residual split, and sampling probes on explicit families.

mod banded;
mod probes;
mod solver;
mod sweep;

pub use probes::{
    am_perturbation_probe, competitor_probe, family_energy_inf, halton, lip_estimate,
    sup_operator_norm, sup_over_region, AmProbe, LipEstimate,
};
pub use solver::{p_descent_solve, DirichletProblem, SolveReport, SolverParams};
pub use sweep::{p_sweep_diagnostics, residual_medians, SweepReport, SweepRow};

use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::solutions::MapFamily;
use crate::tensor::{Jet, Mat, Sym3};
use rayon::prelude::*;
use serde::Serialize;

/// Node values of a map `R^2 -> R^N` on a tensor grid over a box. Nodes on the
/// box edges are the (Dirichlet) boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField {
    pub target_dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Node counts `(m_x, m_y)`.
    pub res: [usize; 2],
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(target_dim: usize, lo: [f64; 2], hi: [f64; 2], res: [usize; 2]) -> Result<Self> {
        if res[0] < 3 || res[1] < 3 {
            return Err(LabError::InvalidParameter(format!(
                "grid needs >= 3 nodes per axis, got {res:?}"
            )));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "bad box {lo:?} x {hi:?}"
            )));
        }
        if target_dim == 0 {
            return Err(LabError::InvalidParameter("target dimension 0".into()));
        }
        Ok(Self {
            target_dim,
            lo,
            hi,
            res,
            values: vec![0.0; res[0] * res[1] * target_dim],
        })
    }

    /// Samples `family` at every node.
    pub fn from_family(
        family: &MapFamily,
        lo: [f64; 2],
        hi: [f64; 2],
        res: [usize; 2],
    ) -> Result<Self> {
        check_planar(family)?;
        let mut g = Self::zeros(family.target_dim(), lo, hi, res)?;
        for j in 0..res[1] {
            for i in 0..res[0] {
                let v = family.value(&g.coord(i, j))?;
                g.set(i, j, &v);
            }
        }
        Ok(g)
    }

    /// Boundary nodes from `family`, interior by transfinite interpolation of
    /// the boundary values.
    pub fn with_boundary_from(
        family: &MapFamily,
        lo: [f64; 2],
        hi: [f64; 2],
        res: [usize; 2],
    ) -> Result<Self> {
        check_planar(family)?;
        let mut g = Self::zeros(family.target_dim(), lo, hi, res)?;
        for j in 0..res[1] {
            for i in 0..res[0] {
                if g.is_boundary(i, j) {
                    let v = family.value(&g.coord(i, j))?;
                    g.set(i, j, &v);
                }
            }
        }
        g.fill_interior_transfinite();
        Ok(g)
    }

    pub fn fill_interior_transfinite(&mut self) {
        let [mx, my] = self.res;
        let nn = self.target_dim;
        let snapshot = self.clone();
        let b = |i: usize, j: usize, a: usize| snapshot.get(i, j)[a];
        for j in 1..my - 1 {
            let t = j as f64 / (my - 1) as f64;
            for i in 1..mx - 1 {
                let s = i as f64 / (mx - 1) as f64;
                let v: Vec<f64> = (0..nn)
                    .map(|a| {
                        (1.0 - s) * b(0, j, a)
                            + s * b(mx - 1, j, a)
                            + (1.0 - t) * b(i, 0, a)
                            + t * b(i, my - 1, a)
                            - ((1.0 - s) * (1.0 - t) * b(0, 0, a)
                                + s * (1.0 - t) * b(mx - 1, 0, a)
                                + (1.0 - s) * t * b(0, my - 1, a)
                                + s * t * b(mx - 1, my - 1, a))
                    })
                    .collect();
                self.set(i, j, &v);
            }
        }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            (self.hi[0] - self.lo[0]) / (self.res[0] - 1) as f64,
            (self.hi[1] - self.lo[1]) / (self.res[1] - 1) as f64,
        ]
    }

    pub fn coord(&self, i: usize, j: usize) -> Vec<f64> {
        let [hx, hy] = self.spacing();
        vec![self.lo[0] + i as f64 * hx, self.lo[1] + j as f64 * hy]
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        (j * self.res[0] + i) * self.target_dim
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + self.target_dim]
    }

    pub fn set(&mut self, i: usize, j: usize, v: &[f64]) {
        let o = self.offset(i, j);
        self.values[o..o + self.target_dim].copy_from_slice(v);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.res[0] - 1 || j == self.res[1] - 1
    }

    pub fn cell_count(&self) -> usize {
        (self.res[0] - 1) * (self.res[1] - 1)
    }

    pub fn cell_area(&self) -> f64 {
        let [hx, hy] = self.spacing();
        hx * hy
    }

    /// Corner nodes of cell `(ci, cj)` with their weights in the `x`- and
    /// `y`-differences.
    pub(crate) fn cell_stencil(&self, ci: usize, cj: usize) -> [((usize, usize), f64, f64); 4] {
        let [hx, hy] = self.spacing();
        let (wx, wy) = (0.5 / hx, 0.5 / hy);
        [
            ((ci, cj), -wx, -wy),
            ((ci + 1, cj), wx, -wy),
            ((ci, cj + 1), -wx, wy),
            ((ci + 1, cj + 1), wx, wy),
        ]
    }

    /// Bilinear-cell central difference gradient of cell `(ci, cj)`; exact for
    /// bilinear (in particular affine) data.
    pub fn cell_grad(&self, ci: usize, cj: usize) -> Mat {
        let mut g = Mat::zeros(self.target_dim, 2);
        for ((i, j), wx, wy) in self.cell_stencil(ci, cj) {
            let v = self.get(i, j);
            for (a, va) in v.iter().enumerate() {
                g.set(a, 0, g.get(a, 0) + wx * va);
                g.set(a, 1, g.get(a, 1) + wy * va);
            }
        }
        g
    }

    /// Central-difference jet at an interior node (second order).
    pub fn node_jet(&self, i: usize, j: usize) -> Result<Jet> {
        if self.is_boundary(i, j) || i >= self.res[0] || j >= self.res[1] {
            return Err(LabError::InvalidParameter(format!(
                "node ({i}, {j}) is not interior"
            )));
        }
        let [hx, hy] = self.spacing();
        let nn = self.target_dim;
        let u =
            |di: isize, dj: isize| self.get((i as isize + di) as usize, (j as isize + dj) as usize);
        let mut grad = Mat::zeros(nn, 2);
        let mut hess = Sym3::zeros(nn, 2);
        for a in 0..nn {
            let c = u(0, 0)[a];
            grad.set(a, 0, (u(1, 0)[a] - u(-1, 0)[a]) / (2.0 * hx));
            grad.set(a, 1, (u(0, 1)[a] - u(0, -1)[a]) / (2.0 * hy));
            hess.set_sym(a, 0, 0, (u(1, 0)[a] - 2.0 * c + u(-1, 0)[a]) / (hx * hx));
            hess.set_sym(a, 1, 1, (u(0, 1)[a] - 2.0 * c + u(0, -1)[a]) / (hy * hy));
            hess.set_sym(
                a,
                0,
                1,
                (u(1, 1)[a] - u(1, -1)[a] - u(-1, 1)[a] + u(-1, -1)[a]) / (4.0 * hx * hy),
            );
        }
        Jet::new(self.coord(i, j), u(0, 0).to_vec(), grad, hess)
    }

    /// `x, y, u_1..u_N` per node.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend((1..=self.target_dim).map(|a| format!("u_{a}")));
        w.write_record(&header)
            .map_err(|e| LabError::Config(e.to_string()))?;
        for j in 0..self.res[1] {
            for i in 0..self.res[0] {
                let mut row: Vec<String> = self.coord(i, j).iter().map(f64::to_string).collect();
                row.extend(self.get(i, j).iter().map(f64::to_string));
                w.write_record(&row)
                    .map_err(|e| LabError::Config(e.to_string()))?;
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| LabError::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| LabError::Config(e.to_string()))
    }

    /// `H` evaluated on every cell gradient, in cell order.
    pub fn cell_hamiltonians(&self, h: &Hamiltonian) -> Result<Vec<f64>> {
        check_hamiltonian(self, h)?;
        let mx = self.res[0] - 1;
        (0..self.cell_count())
            .into_par_iter()
            .map(|c| h.eval(&self.cell_grad(c % mx, c / mx)))
            .collect()
    }
}

fn check_planar(family: &MapFamily) -> Result<()> {
    if family.source_dim() != 2 {
        return Err(LabError::DimensionMismatch(format!(
            "grid fields need n = 2, family '{}' has n = {}",
            family.name,
            family.source_dim()
        )));
    }
    Ok(())
}

fn check_hamiltonian(grid: &GridField, h: &Hamiltonian) -> Result<()> {
    if h.dims() != (grid.target_dim, 2) {
        return Err(LabError::DimensionMismatch(format!(
            "hamiltonian {:?} vs grid ({}, 2)",
            h.dims(),
            grid.target_dim
        )));
    }
    Ok(())
}

/// Discrete `E_p` in overflow-safe form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteEnergy {
    /// `log E_p` (`-inf` when every cell has `H = 0`).
    pub log_energy: f64,
    /// `E_p`, possibly `inf` for very large `p`.
    pub energy: f64,
}

/// `E_p = sum_cells H(Du_cell)^p * cell_area`, aggregated as
/// `log E_p = log(area) + p log(H_max) + log sum (H / H_max)^p`.
pub fn discrete_energy_p(grid: &GridField, h: &Hamiltonian, p: f64) -> Result<DiscreteEnergy> {
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "p must be >= 1, got {p}"
        )));
    }
    let hs = grid.cell_hamiltonians(h)?;
    let hmax = hs.iter().cloned().fold(0.0, f64::max);
    if hmax <= 0.0 {
        return Ok(DiscreteEnergy {
            log_energy: f64::NEG_INFINITY,
            energy: 0.0,
        });
    }
    let scaled: f64 = hs.iter().map(|v| (v / hmax).powf(p)).sum();
    let log_energy = grid.cell_area().ln() + p * hmax.ln() + scaled.ln();
    Ok(DiscreteEnergy {
        log_energy,
        energy: log_energy.exp(),
    })
}

/// `E_inf = max_cells H(Du_cell)`.
pub fn discrete_energy_inf(grid: &GridField, h: &Hamiltonian) -> Result<f64> {
    Ok(grid.cell_hamiltonians(h)?.into_iter().fold(0.0, f64::max))
}
