//! Dense containers for the matrix space `R^N (x) R^n` and its companions.
//!
//! Index conventions follow the operator algebra: `alpha, beta` run over the
//! target dimension `N`, `i, j` over the source dimension `n`.  A [`Mat`]
//! houses a gradient `Du` (`N x n`), a [`Sym3`] houses a Hessian `D^2 u`
//! (`X[alpha][i][j]`, symmetric in `i, j`), and a [`Tensor4`] houses fourth
//! order objects such as `H_PP` or `P (x) Q` indexed `(alpha, i, beta, j)`.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Row-major `rows x cols` real matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LabError::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LabError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        Self::from_fn(size, size, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from its rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(LabError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    /// Rank-one tensor `xi (x) w`, i.e. the matrix `xi w^T`.
    pub fn outer(xi: &[f64], w: &[f64]) -> Self {
        Self::from_fn(xi.len(), w.len(), |r, c| xi[r] * w[c])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.data[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(LabError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols)
                .map(|k| self.get(r, k) * other.get(k, c))
                .sum()
        }))
    }

    /// `self * v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "apply: vector length");
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// `self^T * v`, i.e. the row vector `v^T self`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "apply_transpose: vector length");
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c) * v[r]).sum())
            .collect()
    }

    /// Frobenius inner product `self : other`.
    pub fn frobenius_dot(&self, other: &Mat) -> f64 {
        assert_eq!(self.dims(), other.dims(), "frobenius_dot: dims");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Euclidean (Frobenius) norm `|P| = (P : P)^{1/2}`.
    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Mat {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!(self.dims(), other.dims(), "elementwise op: dims");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

/// Third-order array `X[alpha][i][j]` symmetric in `(i, j)`; houses `D^2 u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sym3 {
    target_dim: usize,
    source_dim: usize,
    data: Vec<f64>,
}

impl Sym3 {
    /// Builds from full storage (`N * n * n` entries, `alpha`-major) and
    /// enforces symmetry by averaging `X_{alpha i j}` with `X_{alpha j i}`.
    pub fn new(target_dim: usize, source_dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != target_dim * source_dim * source_dim {
            return Err(LabError::DimensionMismatch(format!(
                "Sym3 {target_dim}x{source_dim}x{source_dim} needs {} entries, got {}",
                target_dim * source_dim * source_dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("hessian"));
        }
        let mut s = Self {
            target_dim,
            source_dim,
            data,
        };
        for a in 0..target_dim {
            for i in 0..source_dim {
                for j in (i + 1)..source_dim {
                    let avg = 0.5 * (s.get(a, i, j) + s.get(a, j, i));
                    s.put(a, i, j, avg);
                    s.put(a, j, i, avg);
                }
            }
        }
        Ok(s)
    }

    pub fn zeros(target_dim: usize, source_dim: usize) -> Self {
        Self {
            target_dim,
            source_dim,
            data: vec![0.0; target_dim * source_dim * source_dim],
        }
    }

    pub fn from_fn(
        target_dim: usize,
        source_dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(target_dim * source_dim * source_dim);
        for a in 0..target_dim {
            for i in 0..source_dim {
                for j in 0..source_dim {
                    data.push(f(a, i, j));
                }
            }
        }
        Self::new(target_dim, source_dim, data)
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    #[inline]
    pub fn get(&self, alpha: usize, i: usize, j: usize) -> f64 {
        self.data[(alpha * self.source_dim + i) * self.source_dim + j]
    }

    #[inline]
    fn put(&mut self, alpha: usize, i: usize, j: usize, v: f64) {
        let idx = (alpha * self.source_dim + i) * self.source_dim + j;
        self.data[idx] = v;
    }

    /// Sets `X_{alpha i j}` and `X_{alpha j i}` together.
    pub fn set_sym(&mut self, alpha: usize, i: usize, j: usize, v: f64) {
        self.put(alpha, i, j, v);
        self.put(alpha, j, i, v);
    }

    /// Componentwise trace `sum_i X_{alpha i i}` (the Laplacian slot).
    pub fn traces(&self) -> Vec<f64> {
        (0..self.target_dim)
            .map(|a| (0..self.source_dim).map(|i| self.get(a, i, i)).sum())
            .collect()
    }

    /// The `i`-th slice `X_{. i .}` as an `N x n` matrix: `D_i (Du)`.
    pub fn slice(&self, i: usize) -> Mat {
        Mat::from_fn(self.target_dim, self.source_dim, |a, j| self.get(a, i, j))
    }

    /// `sum_alpha w_alpha X_{alpha . .}` as an `n x n` matrix.
    pub fn weighted(&self, w: &[f64]) -> Mat {
        assert_eq!(w.len(), self.target_dim, "weighted: length");
        Mat::from_fn(self.source_dim, self.source_dim, |i, j| {
            (0..self.target_dim).map(|a| w[a] * self.get(a, i, j)).sum()
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Sym3 {
        Self {
            target_dim: self.target_dim,
            source_dim: self.source_dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Sym3) -> Sym3 {
        assert_eq!(
            (self.target_dim, self.source_dim),
            (other.target_dim, other.source_dim),
            "Sym3::sub: shape"
        );
        Self {
            target_dim: self.target_dim,
            source_dim: self.source_dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Fourth-order tensor on `(R^N (x) R^n) (x) (R^N (x) R^n)`, indexed
/// `A[alpha][i][beta][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    target_dim: usize,
    source_dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(target_dim: usize, source_dim: usize) -> Self {
        let m = target_dim * source_dim;
        Self {
            target_dim,
            source_dim,
            data: vec![0.0; m * m],
        }
    }

    pub fn from_fn(
        target_dim: usize,
        source_dim: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(target_dim, source_dim);
        for a in 0..target_dim {
            for i in 0..source_dim {
                for b in 0..target_dim {
                    for j in 0..source_dim {
                        t.set(a, i, b, j, f(a, i, b, j));
                    }
                }
            }
        }
        t
    }

    /// `delta_{alpha beta} delta_{ij}`.
    pub fn identity(target_dim: usize, source_dim: usize) -> Self {
        Self::from_fn(target_dim, source_dim, |a, i, b, j| {
            if a == b && i == j {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `P (x) Q`: `A_{alpha i beta j} = P_{alpha i} Q_{beta j}`.
    pub fn outer(p: &Mat, q: &Mat) -> Self {
        assert_eq!(p.dims(), q.dims(), "Tensor4::outer: dims");
        Self::from_fn(p.rows(), p.cols(), |a, i, b, j| p.get(a, i) * q.get(b, j))
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    #[inline]
    fn index(&self, a: usize, i: usize, b: usize, j: usize) -> usize {
        let m = self.target_dim * self.source_dim;
        (a * self.source_dim + i) * m + b * self.source_dim + j
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize, j: usize) -> f64 {
        self.data[self.index(a, i, b, j)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, j: usize, v: f64) {
        let idx = self.index(a, i, b, j);
        self.data[idx] = v;
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            target_dim: self.target_dim,
            source_dim: self.source_dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Tensor4) -> Self {
        assert_eq!(
            (self.target_dim, self.source_dim),
            (other.target_dim, other.source_dim),
            "Tensor4::add: dims"
        );
        Self {
            target_dim: self.target_dim,
            source_dim: self.source_dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `A : P` contracting the trailing pair: returns `sum_{beta j} A_{alpha i beta j} P_{beta j}`.
    pub fn apply(&self, p: &Mat) -> Mat {
        assert_eq!(
            p.dims(),
            (self.target_dim, self.source_dim),
            "Tensor4::apply"
        );
        Mat::from_fn(self.target_dim, self.source_dim, |a, i| {
            let mut s = 0.0;
            for b in 0..self.target_dim {
                for j in 0..self.source_dim {
                    s += self.get(a, i, b, j) * p.get(b, j);
                }
            }
            s
        })
    }

    /// Largest violation of the major symmetry `A_{alpha i beta j} = A_{beta j alpha i}`.
    pub fn major_asymmetry(&self) -> f64 {
        let (nn, n) = (self.target_dim, self.source_dim);
        let mut worst = 0.0_f64;
        for a in 0..nn {
            for i in 0..n {
                for b in 0..nn {
                    for j in 0..n {
                        worst = worst.max((self.get(a, i, b, j) - self.get(b, j, a, i)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// The contraction `(A : X)_alpha = A_{alpha i beta j} X_{beta i j}`.
pub fn contract(a: &Tensor4, x: &Sym3) -> Result<Vec<f64>> {
    if a.target_dim != x.target_dim() || a.source_dim != x.source_dim() {
        return Err(LabError::DimensionMismatch(format!(
            "contract: tensor on {}x{} vs hessian {}x{}",
            a.target_dim,
            a.source_dim,
            x.target_dim(),
            x.source_dim()
        )));
    }
    let (nn, n) = (a.target_dim, a.source_dim);
    let mut out = vec![0.0; nn];
    for (alpha, slot) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..n {
            for beta in 0..nn {
                for j in 0..n {
                    s += a.get(alpha, i, beta, j) * x.get(beta, i, j);
                }
            }
        }
        *slot = s;
    }
    Ok(out)
}

/// Value, gradient and Hessian of a map `R^n -> R^N` at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub point: Vec<f64>,
    pub value: Vec<f64>,
    pub grad: Mat,
    pub hess: Sym3,
}

impl Jet {
    pub fn new(point: Vec<f64>, value: Vec<f64>, grad: Mat, hess: Sym3) -> Result<Self> {
        let (nn, n) = grad.dims();
        if point.len() != n
            || value.len() != nn
            || hess.target_dim() != nn
            || hess.source_dim() != n
        {
            return Err(LabError::DimensionMismatch(format!(
                "jet: point {}, value {}, grad {}x{}, hess {}x{}",
                point.len(),
                value.len(),
                nn,
                n,
                hess.target_dim(),
                hess.source_dim()
            )));
        }
        if point.iter().chain(&value).any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("jet"));
        }
        Ok(Self {
            point,
            value,
            grad,
            hess,
        })
    }

    /// Target dimension `N`.
    pub fn target_dim(&self) -> usize {
        self.grad.rows()
    }

    /// Source dimension `n`.
    pub fn source_dim(&self) -> usize {
        self.grad.cols()
    }

    /// Gradient of the quadratic Taylor extension at `point + offset`:
    /// `Du + D^2u . offset`.
    pub fn extended_grad(&self, offset: &[f64]) -> Mat {
        let (nn, n) = self.grad.dims();
        Mat::from_fn(nn, n, |a, i| {
            self.grad.get(a, i)
                + (0..n)
                    .map(|j| self.hess.get(a, i, j) * offset[j])
                    .sum::<f64>()
        })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_contract(a: &Tensor4, x: &Sym3) -> Vec<f64> {
        let (nn, n) = (a.target_dim(), a.source_dim());
        let mut out = vec![0.0; nn];
        for (alpha, o) in out.iter_mut().enumerate() {
            for beta in 0..nn {
                for i in 0..n {
                    for j in 0..n {
                        *o += a.get(alpha, i, beta, j) * x.get(beta, i, j);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn scalar_contraction_is_p_squared_times_x() {
        let p = Mat::new(1, 1, vec![2.0]).unwrap();
        let x = Sym3::new(1, 1, vec![3.0]).unwrap();
        let v = contract(&Tensor4::outer(&p, &p), &x).unwrap();
        assert_eq!(v, vec![12.0]);
    }

    #[test]
    fn identity_contraction_gives_traces() {
        let x = Sym3::from_fn(2, 3, |a, i, j| (a + 1) as f64 * (i * 3 + j + i + j) as f64).unwrap();
        let v = contract(&Tensor4::identity(2, 3), &x).unwrap();
        assert_eq!(v, x.traces());
    }

    #[test]
    fn random_contraction_matches_index_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = Tensor4::from_fn(2, 2, |_, _, _, _| rng.gen_range(-1.0..1.0));
            let x = Sym3::from_fn(2, 2, |_, _, _| 0.0).unwrap();
            let mut x = x;
            for al in 0..2 {
                for i in 0..2 {
                    for j in i..2 {
                        x.set_sym(al, i, j, rng.gen_range(-1.0..1.0));
                    }
                }
            }
            let fast = contract(&a, &x).unwrap();
            let slow = brute_contract(&a, &x);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn contraction_rejects_mismatched_dims() {
        let a = Tensor4::identity(2, 2);
        let x = Sym3::zeros(3, 2);
        assert!(matches!(
            contract(&a, &x),
            Err(LabError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(Mat::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Sym3::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn sym3_enforces_symmetry() {
        let x = Sym3::new(1, 2, vec![1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!(x.get(0, 0, 1), 3.0);
        assert_eq!(x.get(0, 1, 0), 3.0);
    }

    #[test]
    fn jet_checks_dimensions() {
        let g = Mat::zeros(2, 1);
        assert!(Jet::new(vec![0.0], vec![0.0], g.clone(), Sym3::zeros(2, 1)).is_err());
        assert!(Jet::new(vec![0.0], vec![0.0, 0.0], g, Sym3::zeros(2, 1)).is_ok());
    }
}
