//! Solve the discrete p-Dirichlet problem for an increasing list of `p` and
//! track the renormalised split `LHS = RHS` of the p-Euler-Lagrange system.
//! The right hand side carries the factor `1/(p - 1)`.

use super::solver::{p_descent_solve, DirichletProblem, SolveReport, SolverParams};
use super::GridField;
use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::DEFAULT_RANK_TOL;
use crate::operators::residual_split;
use crate::solutions::MapFamily;
use crate::tensor::{norm, sub};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log_energy: f64,
    pub median_rhs: f64,
    pub median_lhs: f64,
    pub median_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub family: String,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub res: [usize; 2],
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log median|RHS|` against `log(p - 1)`;
    /// `None` when some median vanishes.
    pub slope: Option<f64>,
    #[serde(skip)]
    pub solves: Vec<SolveReport>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Medians over interior nodes of `|RHS|`, `|LHS|` and `|LHS - RHS|`, with
/// jets from central differences of the grid values.
pub fn residual_medians(grid: &GridField, h: &Hamiltonian, p: f64) -> Result<(f64, f64, f64)> {
    let mut rhs = Vec::new();
    let mut lhs = Vec::new();
    let mut gap = Vec::new();
    for j in 1..grid.res[1] - 1 {
        for i in 1..grid.res[0] - 1 {
            let jet = grid.node_jet(i, j)?;
            let s = residual_split(h, &jet, p, DEFAULT_RANK_TOL)?;
            rhs.push(norm(&s.rhs));
            lhs.push(norm(&s.lhs));
            gap.push(norm(&sub(&s.lhs, &s.rhs)));
        }
    }
    Ok((median(rhs), median(lhs), median(gap)))
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Boundary data from `family` on the box, transfinite initial guess, each
/// solve warm-started from the previous one.
pub fn p_sweep_diagnostics(
    h: &Hamiltonian,
    family: &MapFamily,
    lo: [f64; 2],
    hi: [f64; 2],
    res: [usize; 2],
    p_list: &[f64],
    params: &SolverParams,
) -> Result<SweepReport> {
    if p_list.is_empty()
        || p_list.iter().any(|p| !(*p > 1.0))
        || p_list.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(LabError::InvalidParameter(format!(
            "p list must be increasing and > 1, got {p_list:?}"
        )));
    }
    let mut grid = GridField::with_boundary_from(family, lo, hi, res)?;
    let mut rows = Vec::new();
    let mut solves = Vec::new();
    for &p in p_list {
        let (out, rep) = p_descent_solve(&DirichletProblem {
            h: h.clone(),
            p,
            grid,
            params: params.clone(),
        })?;
        let (median_rhs, median_lhs, median_gap) = residual_medians(&out, h, p)?;
        rows.push(SweepRow {
            p,
            iterations: rep.iterations,
            converged: rep.converged,
            log_energy: rep.log_energy,
            median_rhs,
            median_lhs,
            median_gap,
        });
        solves.push(rep);
        grid = out;
    }
    let slope = if rows.len() >= 2 && rows.iter().all(|r| r.median_rhs > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| (r.p - 1.0).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.median_rhs.ln()).collect();
        Some(ls_slope(&xs, &ys))
    } else {
        None
    };
    Ok(SweepReport {
        family: family.name.clone(),
        lo,
        hi,
        res,
        rows,
        slope,
        solves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::euclidean_hamiltonian;
    use crate::solutions::constant_map;

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [3.0f64, 7.0, 15.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - x).collect();
        assert!((ls_slope(&xs, &ys) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_data_has_zero_residuals() {
        let f = constant_map(vec![0.5], 2);
        let rep = p_sweep_diagnostics(
            &euclidean_hamiltonian(1, 2),
            &f,
            [0.5, 0.5],
            [1.5, 1.5],
            [7, 7],
            &[4.0, 8.0],
            &SolverParams::default(),
        )
        .unwrap();
        assert!(rep
            .rows
            .iter()
            .all(|r| r.median_rhs == 0.0 && r.median_lhs == 0.0 && r.median_gap == 0.0));
        assert!(rep.slope.is_none());
    }

    #[test]
    fn rejects_unsorted_p_list() {
        let f = constant_map(vec![0.5], 2);
        let h = euclidean_hamiltonian(1, 2);
        let r = p_sweep_diagnostics(
            &h,
            &f,
            [0.5, 0.5],
            [1.5, 1.5],
            [5, 5],
            &[8.0, 4.0],
            &SolverParams::default(),
        );
        assert!(r.is_err());
    }
}
