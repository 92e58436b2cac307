//! Damped Newton iteration for the discrete p-Dirichlet problem.
//!
//! The objective is `F = sum_cells area (H / H_ref)^p / p` with `H_ref` the
//! largest cell value at the current iterate, which is `E_p` up to a positive
//! factor and keeps every term in `[0, 1]` for large `p`. Steps are accepted
//! by Armijo backtracking on `F`. Once the predicted decrease falls below the
//! resolution of `F` (cells with tiny `H` barely register in the energy) the
//! iteration switches to full Newton steps, which are scale invariant, and
//! judges convergence by the per-node relative residual.

use super::banded::BandedSym;
use super::GridField;
use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub max_iterations: usize,
    /// Bound on the per-node relative residual `|dE/du_k| / sum_cells c_k`, with
    /// `c_k` the absolute size of the cell terms before they cancel.
    pub tolerance: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    /// Smallest step length tried by the line search.
    pub min_step: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            armijo: 1e-4,
            min_step: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub h: Hamiltonian,
    pub p: f64,
    /// Boundary nodes hold the Dirichlet data; interior nodes the initial guess.
    pub grid: GridField,
    pub params: SolverParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub p: f64,
    pub iterations: usize,
    pub armijo_steps: usize,
    pub full_newton_steps: usize,
    pub converged: bool,
    pub log_energy: f64,
    /// `|| grad E_p ||_inf` over interior unknowns.
    pub gradient_norm: f64,
    pub relative_residual: f64,
    /// `log E_p` after every accepted step (starting with the initial guess).
    pub log_energy_history: Vec<f64>,
}

struct Assembly {
    objective: f64,
    grad: Vec<f64>,
    hess: BandedSym,
    scale: Vec<f64>,
}

struct Layout {
    mx: usize,
    my: usize,
    nn: usize,
}

impl Layout {
    fn of(grid: &GridField) -> Self {
        Self {
            mx: grid.res[0],
            my: grid.res[1],
            nn: grid.target_dim,
        }
    }

    fn unknowns(&self) -> usize {
        (self.mx - 2) * (self.my - 2) * self.nn
    }

    fn bandwidth(&self) -> usize {
        self.mx * self.nn
    }

    fn dof(&self, i: usize, j: usize, a: usize) -> Option<usize> {
        if i == 0 || j == 0 || i == self.mx - 1 || j == self.my - 1 {
            None
        } else {
            Some(((j - 1) * (self.mx - 2) + (i - 1)) * self.nn + a)
        }
    }
}

fn interior(grid: &GridField, lay: &Layout) -> Vec<f64> {
    let mut out = vec![0.0; lay.unknowns()];
    for j in 1..lay.my - 1 {
        for i in 1..lay.mx - 1 {
            for (a, v) in grid.get(i, j).iter().enumerate() {
                out[lay.dof(i, j, a).expect("interior")] = *v;
            }
        }
    }
    out
}

fn write_interior(grid: &mut GridField, lay: &Layout, u: &[f64]) {
    for j in 1..lay.my - 1 {
        for i in 1..lay.mx - 1 {
            let v: Vec<f64> = (0..lay.nn)
                .map(|a| u[lay.dof(i, j, a).expect("interior")])
                .collect();
            grid.set(i, j, &v);
        }
    }
}

fn h_ref(grid: &GridField, h: &Hamiltonian) -> Result<f64> {
    Ok(grid.cell_hamiltonians(h)?.into_iter().fold(0.0, f64::max))
}

/// `sum_cells area (H / href)^p / p`, summed in cell order.
fn objective(grid: &GridField, h: &Hamiltonian, p: f64, href: f64) -> Result<f64> {
    let a = grid.cell_area();
    Ok(grid
        .cell_hamiltonians(h)?
        .into_iter()
        .map(|v| a * (v / href).powf(p) / p)
        .sum())
}

type CellContribution = (f64, Vec<(usize, f64, f64)>, Vec<(usize, usize, f64)>);

fn assemble(
    grid: &GridField,
    h: &Hamiltonian,
    p: f64,
    href: f64,
    lay: &Layout,
) -> Result<Assembly> {
    let area = grid.cell_area();
    let cx = lay.mx - 1;
    let nn = lay.nn;
    let cells: Vec<CellContribution> = (0..grid.cell_count())
        .into_par_iter()
        .map(|c| -> Result<CellContribution> {
            let (ci, cj) = (c % cx, c / cx);
            let pm = grid.cell_grad(ci, cj);
            let hv = h.eval(&pm)?;
            if hv <= 0.0 {
                return Ok((0.0, Vec::new(), Vec::new()));
            }
            let r = hv / href;
            let hp = h.grad(&pm)?;
            let hpp = h.hess(&pm)?;
            let c1 = area * r.powf(p - 1.0) / href;
            let c2 = area * (p - 1.0) * r.powf(p - 2.0) / (href * href);
            let stencil = grid.cell_stencil(ci, cj);
            let mut g = Vec::new();
            let mut hs = Vec::new();
            for (k1, &((i1, j1), wx1, wy1)) in stencil.iter().enumerate() {
                for a in 0..nn {
                    let Some(d1) = lay.dof(i1, j1, a) else {
                        continue;
                    };
                    let gv = c1 * (hp.get(a, 0) * wx1 + hp.get(a, 1) * wy1);
                    // size of the term before cancellation inside the cell
                    let gs = c1 * (hp.get(a, 0).abs() * wx1.abs() + hp.get(a, 1).abs() * wy1.abs());
                    g.push((d1, gv, gs));
                    for (k2, &((i2, j2), wx2, wy2)) in stencil[..=k1].iter().enumerate() {
                        // each unordered pair once; the band storage is symmetric
                        let top = if k2 == k1 { a + 1 } else { nn };
                        for b in 0..top {
                            let Some(d2) = lay.dof(i2, j2, b) else {
                                continue;
                            };
                            let w1 = [wx1, wy1];
                            let w2 = [wx2, wy2];
                            let mut v = 0.0;
                            for k in 0..2 {
                                for l in 0..2 {
                                    let t =
                                        c2 * hp.get(a, k) * hp.get(b, l) + c1 * hpp.get(a, k, b, l);
                                    v += t * w1[k] * w2[l];
                                }
                            }
                            hs.push((d1, d2, v));
                        }
                    }
                }
            }
            Ok((area * r.powf(p) / p, g, hs))
        })
        .collect::<Result<_>>()?;
    let m = lay.unknowns();
    let mut out = Assembly {
        objective: 0.0,
        grad: vec![0.0; m],
        hess: BandedSym::zeros(m, lay.bandwidth()),
        scale: vec![0.0; m],
    };
    for (f, g, hs) in cells {
        out.objective += f;
        for (d, v, s) in g {
            out.grad[d] += v;
            out.scale[d] += s;
        }
        for (d1, d2, v) in hs {
            out.hess.add(d1, d2, v);
        }
    }
    Ok(out)
}

fn relative_residual(a: &Assembly) -> f64 {
    a.grad
        .iter()
        .zip(&a.scale)
        .map(|(g, s)| if *s > 0.0 { g.abs() / s } else { 0.0 })
        .fold(0.0, f64::max)
}

fn newton_direction(a: &Assembly) -> Option<Vec<f64>> {
    let rhs: Vec<f64> = a.grad.iter().map(|g| -g).collect();
    // unknowns that no cell touches (all adjacent H = 0) stay put
    let floor = |mu: f64| {
        let tiny = (0..a.hess.size)
            .map(|i| a.hess.diag(i).abs())
            .fold(0.0, f64::max)
            * 1e-300;
        a.hess.damped(mu, tiny.max(f64::MIN_POSITIVE))
    };
    let mut mu = 0.0;
    loop {
        if let Some(d) = floor(mu).solve(&rhs) {
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        mu = if mu == 0.0 { 1e-10 } else { mu * 10.0 };
        if mu > 1e10 {
            return None;
        }
    }
}

fn log_energy(objective: f64, p: f64, href: f64) -> f64 {
    (p * objective).ln() + p * href.ln()
}

/// Minimises the discrete `E_p` over interior node values with the boundary
/// nodes held fixed.
pub fn p_descent_solve(problem: &DirichletProblem) -> Result<(GridField, SolveReport)> {
    let DirichletProblem { h, p, grid, params } = problem;
    let p = *p;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "p must be >= 1, got {p}"
        )));
    }
    if grid.values().iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("boundary data"));
    }
    let lay = Layout::of(grid);
    let mut grid = grid.clone();
    let mut u = interior(&grid, &lay);
    let mut report = SolveReport {
        p,
        iterations: 0,
        armijo_steps: 0,
        full_newton_steps: 0,
        converged: false,
        log_energy: f64::NEG_INFINITY,
        gradient_norm: 0.0,
        relative_residual: 0.0,
        log_energy_history: Vec::new(),
    };
    if lay.unknowns() == 0 {
        report.converged = true;
        return Ok((grid, report));
    }
    for it in 0..=params.max_iterations {
        report.iterations = it;
        let href = h_ref(&grid, h)?;
        if href <= 0.0 {
            report.converged = true;
            report.log_energy_history.push(f64::NEG_INFINITY);
            return Ok((grid, report));
        }
        let asm = assemble(&grid, h, p, href, &lay)?;
        let le = log_energy(asm.objective, p, href);
        report.log_energy = le;
        if report.log_energy_history.is_empty() {
            report.log_energy_history.push(le);
        }
        report.relative_residual = relative_residual(&asm);
        let gmax = asm.grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        report.gradient_norm = gmax * href.powf(p);
        if report.relative_residual <= params.tolerance {
            report.converged = true;
            return Ok((grid, report));
        }
        if it == params.max_iterations {
            break;
        }
        let Some(d) = newton_direction(&asm) else {
            return Err(LabError::NonDecreaseStall {
                iteration: it,
                gradient_norm: report.gradient_norm,
            });
        };
        let unorm = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if d.iter().fold(0.0_f64, |m, v| m.max(v.abs())) <= 1e-15 * (1.0 + unorm) {
            report.converged = true;
            return Ok((grid, report));
        }
        let slope: f64 = asm.grad.iter().zip(&d).map(|(g, s)| g * s).sum();
        let resolution = 1e-12 * asm.objective;
        if slope.abs() <= resolution {
            // predicted decrease is below what F can resolve: Newton steps
            // only have to keep F within its resolution
            let mut alpha = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                write_interior(&mut grid, &lay, &trial);
                let f = objective(&grid, h, p, href)?;
                if f <= asm.objective + resolution {
                    break Some((trial, f));
                }
                alpha *= 0.5;
                if alpha < params.min_step {
                    break None;
                }
            };
            let Some((trial, f)) = accepted else {
                write_interior(&mut grid, &lay, &u);
                return Err(LabError::NonDecreaseStall {
                    iteration: it,
                    gradient_norm: report.gradient_norm,
                });
            };
            report.full_newton_steps += 1;
            report.log_energy_history.push(log_energy(f, p, href));
            u = trial;
            continue;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= params.min_step {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            write_interior(&mut grid, &lay, &trial);
            let f = objective(&grid, h, p, href)?;
            if f <= asm.objective + params.armijo * alpha * slope {
                accepted = Some((trial, f));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, f)) = accepted else {
            write_interior(&mut grid, &lay, &u);
            return Err(LabError::NonDecreaseStall {
                iteration: it,
                gradient_norm: report.gradient_norm,
            });
        };
        report.armijo_steps += 1;
        report.log_energy_history.push(log_energy(f, p, href));
        u = trial;
        write_interior(&mut grid, &lay, &u);
    }
    Ok((grid, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::euclidean_hamiltonian;
    use crate::solutions::{affine_map, constant_map, exp_diff_map, saddle_map as saddle};
    use crate::tensor::Mat;

    fn solve(
        family: &crate::solutions::MapFamily,
        p: f64,
        res: usize,
        lo: [f64; 2],
        hi: [f64; 2],
    ) -> (GridField, SolveReport) {
        let grid = GridField::with_boundary_from(family, lo, hi, [res, res]).unwrap();
        let h = euclidean_hamiltonian(family.target_dim(), 2);
        p_descent_solve(&DirichletProblem {
            h,
            p,
            grid,
            params: SolverParams::default(),
        })
        .unwrap()
    }

    fn assert_monotone(r: &SolveReport) {
        for w in r.log_energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", r.log_energy_history);
        }
    }

    #[test]
    fn affine_data_is_a_fixed_point() {
        let f = affine_map(Mat::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let mut grid = GridField::with_boundary_from(&f, [0.0, 0.0], [1.0, 1.0], [11, 11]).unwrap();
        // perturb the interior so the solver has work to do
        for j in 1..10 {
            for i in 1..10 {
                let v = grid.get(i, j)[0] + 0.05 * ((i * j) as f64).sin();
                grid.set(i, j, &[v]);
            }
        }
        let (out, rep) = p_descent_solve(&DirichletProblem {
            h: euclidean_hamiltonian(1, 2),
            p: 2.0,
            grid,
            params: SolverParams::default(),
        })
        .unwrap();
        assert!(rep.converged);
        assert!(rep.gradient_norm <= 1e-10, "{rep:?}");
        for j in 0..11 {
            for i in 0..11 {
                assert!((out.get(i, j)[0] - out.coord(i, j)[0]).abs() <= 1e-8);
            }
        }
        assert_monotone(&rep);
    }

    #[test]
    fn p_one_saddle_is_discrete_harmonic() {
        let (out, rep) = solve(&saddle(), 1.0, 15, [-1.0, -1.0], [1.0, 1.0]);
        assert!(rep.converged);
        // independent 5-point Laplacian on the solver output
        let [hx, hy] = out.spacing();
        for j in 1..14 {
            for i in 1..14 {
                let u = |a: usize, b: usize| out.get(a, b)[0];
                let lap = (u(i + 1, j) - 2.0 * u(i, j) + u(i - 1, j)) / (hx * hx)
                    + (u(i, j + 1) - 2.0 * u(i, j) + u(i, j - 1)) / (hy * hy);
                assert!(lap.abs() <= 1e-6, "{lap}");
            }
        }
    }

    #[test]
    fn large_p_converges_with_monotone_energy() {
        for p in [4.0, 16.0] {
            let (_, rep) = solve(&saddle(), p, 11, [-1.0, -1.0], [1.0, 1.0]);
            assert!(rep.converged, "{rep:?}");
            assert_monotone(&rep);
        }
    }

    #[test]
    fn vector_exp_diff_data_converges() {
        let (_, rep) = solve(&exp_diff_map(), 8.0, 21, [-0.8, -0.6], [0.6, 0.8]);
        assert!(rep.converged, "{rep:?}");
        assert_monotone(&rep);
    }

    #[test]
    fn constant_data_is_immediate() {
        let (out, rep) = solve(&constant_map(vec![2.0], 2), 8.0, 7, [0.0, 0.0], [1.0, 1.0]);
        assert!(rep.converged);
        assert!(out.values().iter().all(|v| (v - 2.0).abs() <= 1e-14));
    }
}
