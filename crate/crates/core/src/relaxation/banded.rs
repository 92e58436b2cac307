//! Symmetric banded matrices and their Cholesky factorisation.

/// Lower band storage: `band[i * (bw + 1) + d] = A[i][i - d]`.
#[derive(Debug, Clone)]
pub(crate) struct BandedSym {
    pub size: usize,
    pub bw: usize,
    band: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(size: usize, bw: usize) -> Self {
        Self {
            size,
            bw,
            band: vec![0.0; size * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, d: usize) -> usize {
        i * (self.bw + 1) + d
    }

    /// Adds `v` to `A[i][j]` (and, implicitly, `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        debug_assert!(d <= self.bw, "entry outside band");
        let k = self.idx(r, d);
        self.band[k] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.band[self.idx(i, 0)]
    }

    /// `A + mu * diag(A)`, with `floor` added to every diagonal entry.
    pub fn damped(&self, mu: f64, floor: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.size {
            let k = out.idx(i, 0);
            out.band[k] += mu * self.band[k].abs() + floor;
        }
        out
    }

    /// Solves `A x = b` by banded Cholesky; `None` if `A` is not numerically
    /// positive definite.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.size;
        let bw = self.bw;
        let mut l = self.band.clone();
        let at = |i: usize, d: usize| i * (bw + 1) + d;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[at(i, i - j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[at(i, i - k)] * l[at(j, j - k)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[at(i, 0)] = s.sqrt();
                } else {
                    l[at(i, i - j)] = s / l[at(j, 0)];
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for k in lo..i {
                s -= l[at(i, i - k)] * y[k];
            }
            y[i] = s / l[at(i, 0)];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in (i + 1)..=hi {
                s -= l[at(k, k - i)] * y[k];
            }
            y[i] = s / l[at(i, 0)];
        }
        Some(y)
    }

    #[cfg(test)]
    fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.size]; self.size];
        for i in 0..self.size {
            for d in 0..=self.bw.min(i) {
                let v = self.band[self.idx(i, d)];
                a[i][i - d] = v;
                a[i - d][i] = v;
            }
        }
        a
    }
}
