//! The interface `S = {|f'(x).g'(y)| = 1}` of a separable map, where the two
//! tangents become colinear and the rank of `Du` drops.

use super::{FamilyKind, MapFamily};
use crate::error::{LabError, Result};
use crate::linalg::{svd_projections, DEFAULT_RANK_TOL};
use crate::tensor::{dot, norm};
use serde::{Deserialize, Serialize};

const SPEED_TOL: f64 = 1e-10;
const GOLDEN_ITERS: usize = 80;
const BOUNDARY_EPS: f64 = 1e-12;
const CONFIRM_TOL: f64 = 1e-9;
// golden section pins a flat maximum only to about sqrt(eps)
const REFINE_RESOLUTION: f64 = 1e-6;

/// Tensor-product grid over a planar box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub counts: [usize; 2],
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, count: usize) -> Self {
        Self {
            lo: [lo, lo],
            hi: [hi, hi],
            counts: [count, count],
        }
    }

    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        let c = self.counts[axis];
        if c < 2 {
            return 0.5 * (self.lo[axis] + self.hi[axis]);
        }
        self.lo[axis] + (self.hi[axis] - self.lo[axis]) * k as f64 / (c - 1) as f64
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let c = self.counts[axis];
        if c < 2 {
            0.0
        } else {
            (self.hi[axis] - self.lo[axis]) / (c - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfacePoint {
    pub point: Vec<f64>,
    /// `||f'(x).g'(y)| - 1|` at the grid point.
    pub defect: f64,
    pub rank: usize,
    /// Maximiser of `|f'(.).g'(y)|` along the grid line through the point,
    /// within one grid spacing.
    pub refined: Vec<f64>,
    pub refined_defect: f64,
    /// The refined point is colinear to `1e-9` and further than the refinement
    /// resolution from the boundary. Grid points that only approach a colinear
    /// set lying on the boundary stay unconfirmed.
    pub confirmed: bool,
}

/// Grid points of the family's domain where the tangents of `f` and `g` are
/// colinear to within `tol`, with the rank of `Du` there.
pub fn interface_locus(
    family: &MapFamily,
    grid: &GridSpec,
    tol: f64,
) -> Result<Vec<InterfacePoint>> {
    let FamilyKind::Separable { f, g } = &family.kind else {
        return Err(LabError::InvalidParameter(format!(
            "interface detection needs a separable family, got '{}'",
            family.name
        )));
    };
    if grid.counts.contains(&0) || !(tol >= 0.0) {
        return Err(LabError::InvalidParameter(
            "empty grid or negative tolerance".into(),
        ));
    }
    for k in 0..grid.counts[0] {
        let s = norm(&f.d1(grid.coord(0, k)));
        if (s - 1.0).abs() > SPEED_TOL {
            return Err(LabError::NotUnitSpeed((s - 1.0).abs()));
        }
    }
    for k in 0..grid.counts[1] {
        let s = norm(&g.d1(grid.coord(1, k)));
        if (s - 1.0).abs() > SPEED_TOL {
            return Err(LabError::NotUnitSpeed((s - 1.0).abs()));
        }
    }
    let colinearity = |x: f64, y: f64| dot(&f.d1(x), &g.d1(y)).abs();
    let dx = grid.spacing(0);
    let mut out = Vec::new();
    for ky in 0..grid.counts[1] {
        let y = grid.coord(1, ky);
        for kx in 0..grid.counts[0] {
            let x = grid.coord(0, kx);
            // open domain: grid points on the boundary (up to rounding) are skipped
            if family.domain.margin(&[x, y]) <= BOUNDARY_EPS {
                continue;
            }
            let defect = (colinearity(x, y) - 1.0).abs();
            if defect > tol {
                continue;
            }
            let rank = svd_projections(&family.grad(&[x, y])?, DEFAULT_RANK_TOL)?.rank;
            let xr = golden_max(|t| colinearity(t, y), x - dx, x + dx);
            let refined_defect = (colinearity(xr, y) - 1.0).abs();
            out.push(InterfacePoint {
                point: vec![x, y],
                defect,
                rank,
                refined: vec![xr, y],
                refined_defect,
                confirmed: refined_defect <= CONFIRM_TOL
                    && family.domain.margin(&[xr, y]) > REFINE_RESOLUTION,
            });
        }
    }
    Ok(out)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    if a == b {
        return a;
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
