//! Small dense linear algebra on `R^N (x) R^n`: Jacobi SVD and eigen
//! solvers, range/null-space projections, operator norms and the H-Jacobian.

use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::tensor::Mat;
use serde::{Deserialize, Serialize};

/// Default relative rank cutoff: `sigma > DEFAULT_RANK_TOL * sigma_max`.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `P = U diag(sigma) V^T`.
///
/// `sigma` is sorted decreasingly and has `P.cols()` entries; `left[k]` is
/// only meaningful when `sigma[k] > 0`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub sigma: Vec<f64>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

/// One-sided (Hestenes) Jacobi SVD, iterated until every column pair is
/// orthogonal to relative accuracy `1e-14`.
pub fn svd(p: &Mat) -> Svd {
    let (m, n) = p.dims();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|c| p.col(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for a in 0..n {
            for b in (a + 1)..n {
                let alpha: f64 = cols[a].iter().map(|x| x * x).sum();
                let beta: f64 = cols[b].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let (x, y) = (cols[a][r], cols[b][r]);
                    cols[a][r] = c * x - s * y;
                    cols[b][r] = s * x + c * y;
                }
                for r in 0..n {
                    let (x, y) = (v[a][r], v[b][r]);
                    v[a][r] = c * x - s * y;
                    v[b][r] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut out = Svd {
        sigma: Vec::with_capacity(n),
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
    };
    for k in order {
        let s = norms[k];
        out.sigma.push(s);
        out.left.push(if s > 0.0 {
            cols[k].iter().map(|x| x / s).collect()
        } else {
            vec![0.0; m]
        });
        out.right.push(v[k].clone());
    }
    out
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in decreasing order with matching unit vectors.
pub fn symmetric_eigen(a: &Mat) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "symmetric_eigen: square matrix required");
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a.row(r)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a.max_abs();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| m[r][c] * m[r][c])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (x, y) = (m[k][p], m[k][q]);
                    m[k][p] = c * x - s * y;
                    m[k][q] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (m[p][k], m[q][k]);
                    m[p][k] = c * x - s * y;
                    m[q][k] = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let values = order.iter().map(|&k| m[k][k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r][k]).collect())
        .collect();
    (values, vectors)
}

/// Orthogonal projections onto the range of `P` and onto the null space of `P^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub tangential: Mat,
    pub normal: Mat,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Some singular value lies in the band `[0.1, 10] * tol * sigma_max`,
    /// so the rank decision is sensitive to the tolerance.
    pub ambiguous: bool,
}

/// `[P]^T` (range) and `[P]^perp` (null space of `P^T`) with the relative cutoff
/// `sigma > tol * sigma_max`.  For `P = 0` the tangential projection is zero.
pub fn svd_projections(p: &Mat, tol: f64) -> Result<ProjectionPair> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    let nn = p.rows();
    let dec = svd(p);
    let sigma_max = dec.sigma.first().copied().unwrap_or(0.0);
    let mut tangential = Mat::zeros(nn, nn);
    let mut rank = 0;
    let mut ambiguous = false;
    if sigma_max > 0.0 {
        let cut = tol * sigma_max;
        for (s, u) in dec.sigma.iter().zip(&dec.left) {
            if *s >= 0.1 * cut && *s <= 10.0 * cut {
                ambiguous = true;
            }
            if *s > cut {
                rank += 1;
                for a in 0..nn {
                    for b in 0..nn {
                        tangential.set(a, b, tangential.get(a, b) + u[a] * u[b]);
                    }
                }
            }
        }
    }
    let normal = Mat::identity(nn).sub(&tangential);
    Ok(ProjectionPair {
        tangential,
        normal,
        rank,
        singular_values: dec.sigma,
        ambiguous,
    })
}

/// `||P|| = max_{|w|=1} |P w| = max sigma(P^T P)^{1/2}`.
pub fn operator_norm(p: &Mat) -> f64 {
    let gram = p.transpose().matmul(p).expect("square gram");
    let (vals, _) = symmetric_eigen(&gram);
    vals[0].max(0.0).sqrt()
}

/// `||P||_* = max_{|xi|=1} |xi^T P| = max sigma(P P^T)^{1/2}`.
pub fn dual_operator_norm(p: &Mat) -> f64 {
    let gram = p.matmul(&p.transpose()).expect("square gram");
    let (vals, _) = symmetric_eigen(&gram);
    vals[0].max(0.0).sqrt()
}

/// Top eigenvector of `P P^T` with a strictness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenField {
    pub e: Vec<f64>,
    pub strict: bool,
    /// `(lambda_1 - lambda_2) / max(lambda_1, eps)`; infinite when `N = 1`.
    pub relative_gap: f64,
    pub eigenvalues: Vec<f64>,
}

/// Unit eigenvector for the largest eigenvalue of `P P^T`.
///
/// The first component with magnitude above `1e-8` is made positive.  For
/// `N = 1` the field is `e = 1` and always strict.
pub fn max_eigen_field(p: &Mat, gap_tol: f64) -> Result<EigenField> {
    if !(gap_tol > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "gap tolerance must be positive, got {gap_tol}"
        )));
    }
    let gram = p.matmul(&p.transpose())?;
    let (vals, vecs) = symmetric_eigen(&gram);
    let mut e = vecs[0].clone();
    if let Some(first) = e.iter().find(|x| x.abs() > 1e-8) {
        if *first < 0.0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let relative_gap = if vals.len() == 1 {
        f64::INFINITY
    } else {
        (vals[0] - vals[1]) / vals[0].max(f64::EPSILON)
    };
    Ok(EigenField {
        e,
        strict: relative_gap > gap_tol,
        relative_gap,
        eigenvalues: vals,
    })
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &Mat) -> f64 {
    let n = a.rows();
    assert_eq!(n, a.cols(), "determinant: square matrix required");
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a.row(r)).collect();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&x, &y| m[x][k].abs().total_cmp(&m[y][k].abs()))
            .unwrap();
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for r in (k + 1)..n {
            let f = m[r][k] / m[k][k];
            for c in k..n {
                m[r][c] -= f * m[k][c];
            }
        }
    }
    det
}

/// The H-Jacobian `det(H_P^T H_P)^{1/2}` (`n <= N`) or `det(H_P H_P^T)^{1/2}`
/// (`n >= N`) of the gradient `p`.
pub fn h_jacobian(h: &Hamiltonian, p: &Mat) -> Result<f64> {
    let hp = h.grad(p)?;
    let gram = if hp.cols() <= hp.rows() {
        hp.transpose().matmul(&hp)?
    } else {
        hp.matmul(&hp.transpose())?
    };
    Ok(determinant(&gram).max(0.0).sqrt())
}

/// Ordinary Jacobian `Ju`: product of the `min(n, N)` singular values.
pub fn jacobian(p: &Mat) -> f64 {
    let k = p.rows().min(p.cols());
    svd(p).sigma.iter().take(k).product()
}
