//! Hamiltonians `H(P)` on the matrix space together with `H_P` and `H_PP`.
//!
//! Only `x`- and `u`-independent Hamiltonians are modelled.  Three kinds are
//! provided:
//!
//! * `euclidean`: `w |P|^2` with the customary weight `w = 1/2`;
//! * `dual-op-norm`: `1/2 ||P||_*^2`, differentiable only where the top
//!   eigenvalue of `P P^T` is simple;
//! * `segment-flat`: `1/2 dist(P, L)^2` for the line `L` through two rank-one
//!   matrices `eta (x) a` and `eta (x) b`, which vanishes together with its
//!   gradient on the segment between them.

use crate::error::{LabError, Result};
use crate::linalg::{dual_operator_norm, max_eigen_field};
use crate::tensor::{dot, norm, Mat, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Step used for the finite-difference Hessian of the dual-norm Hamiltonian.
pub const DUAL_HESS_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianKind {
    Euclidean { weight: f64 },
    DualOperatorNorm { gap_tol: f64 },
    SegmentFlat { anchor: Mat, direction: Mat },
}

/// Descriptor of a Hamiltonian on `R^N (x) R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    name: &'static str,
    target_dim: usize,
    source_dim: usize,
    kind: HamiltonianKind,
}

/// `H(P) = 1/2 |P|^2`.
pub fn euclidean_hamiltonian(target_dim: usize, source_dim: usize) -> Hamiltonian {
    Hamiltonian::euclidean_weighted(target_dim, source_dim, 0.5)
}

/// `H(P) = 1/2 ||P||_*^2` with the dual operator norm.
pub fn dual_norm_hamiltonian(target_dim: usize, source_dim: usize, gap_tol: f64) -> Hamiltonian {
    Hamiltonian {
        name: "dual-op-norm",
        target_dim,
        source_dim,
        kind: HamiltonianKind::DualOperatorNorm { gap_tol },
    }
}

/// `H(P) = 1/2 dist(P, L)^2` where `L` is the line through `eta (x) a` and `eta (x) b`.
pub fn segment_flat_hamiltonian(eta: &[f64], a: &[f64], b: &[f64]) -> Result<Hamiltonian> {
    if a.len() != b.len() || eta.is_empty() || a.is_empty() {
        return Err(LabError::DimensionMismatch(
            "segment-flat: a and b must have equal nonzero length".into(),
        ));
    }
    let eta_norm = norm(eta);
    if !(eta_norm > 0.0) {
        return Err(LabError::DegenerateSegment);
    }
    let eta: Vec<f64> = eta.iter().map(|v| v / eta_norm).collect();
    let anchor = Mat::outer(&eta, a);
    let direction = Mat::outer(&eta, b).sub(&anchor);
    if direction.frobenius_norm() <= 1e-14 * (1.0 + anchor.frobenius_norm()) {
        return Err(LabError::DegenerateSegment);
    }
    Ok(Hamiltonian {
        name: "segment-flat",
        target_dim: eta.len(),
        source_dim: a.len(),
        kind: HamiltonianKind::SegmentFlat { anchor, direction },
    })
}

impl Hamiltonian {
    /// `H(P) = weight |P|^2`.
    pub fn euclidean_weighted(target_dim: usize, source_dim: usize, weight: f64) -> Self {
        Self {
            name: "euclidean",
            target_dim,
            source_dim,
            kind: HamiltonianKind::Euclidean { weight },
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    /// `(N, n)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.target_dim, self.source_dim)
    }

    pub fn smooth_everywhere(&self) -> bool {
        !matches!(self.kind, HamiltonianKind::DualOperatorNorm { .. })
    }

    fn check(&self, p: &Mat) -> Result<()> {
        if p.dims() != self.dims() {
            return Err(LabError::DimensionMismatch(format!(
                "{} Hamiltonian on {}x{} evaluated at a {}x{} matrix",
                self.name,
                self.target_dim,
                self.source_dim,
                p.rows(),
                p.cols()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection of `P` onto the line of a segment-flat Hamiltonian.
    fn line_projection(anchor: &Mat, direction: &Mat, p: &Mat) -> Mat {
        let rel = p.sub(anchor);
        let t = rel.frobenius_dot(direction) / direction.frobenius_dot(direction);
        anchor.add(&direction.scale(t))
    }

    pub fn eval(&self, p: &Mat) -> Result<f64> {
        self.check(p)?;
        Ok(match &self.kind {
            HamiltonianKind::Euclidean { weight } => weight * p.frobenius_dot(p),
            HamiltonianKind::DualOperatorNorm { .. } => {
                let s = dual_operator_norm(p);
                0.5 * s * s
            }
            HamiltonianKind::SegmentFlat { anchor, direction } => {
                let r = p.sub(&Self::line_projection(anchor, direction, p));
                0.5 * r.frobenius_dot(&r)
            }
        })
    }

    /// `H_P(P)`.  Fails with [`LabError::EigenvalueCoalescence`] for the dual
    /// norm when the top eigenvalue of `P P^T` is not strict.
    pub fn grad(&self, p: &Mat) -> Result<Mat> {
        self.check(p)?;
        match &self.kind {
            HamiltonianKind::Euclidean { weight } => Ok(p.scale(2.0 * weight)),
            HamiltonianKind::DualOperatorNorm { gap_tol } => {
                let field = max_eigen_field(p, *gap_tol)?;
                if !field.strict {
                    return Err(LabError::EigenvalueCoalescence {
                        gap: field.relative_gap,
                        gap_tol: *gap_tol,
                    });
                }
                // H_{P_{alpha i}} = e_alpha e_beta P_{beta i}
                let e = &field.e;
                let q = p.apply_transpose(e);
                Ok(Mat::outer(e, &q))
            }
            HamiltonianKind::SegmentFlat { anchor, direction } => {
                Ok(p.sub(&Self::line_projection(anchor, direction, p)))
            }
        }
    }

    /// `H_PP(P)` indexed `(alpha, i, beta, j)`.
    pub fn hess(&self, p: &Mat) -> Result<Tensor4> {
        self.check(p)?;
        let (nn, n) = self.dims();
        match &self.kind {
            HamiltonianKind::Euclidean { weight } => {
                Ok(Tensor4::identity(nn, n).scale(2.0 * weight))
            }
            HamiltonianKind::SegmentFlat { direction, .. } => {
                let dd = direction.frobenius_dot(direction);
                Ok(Tensor4::from_fn(nn, n, |a, i, b, j| {
                    let id = if a == b && i == j { 1.0 } else { 0.0 };
                    id - direction.get(a, i) * direction.get(b, j) / dd
                }))
            }
            HamiltonianKind::DualOperatorNorm { .. } => {
                // H_P must exist at P itself, not only at the stencil points.
                self.grad(p)?;
                let h = DUAL_HESS_STEP;
                let mut t = Tensor4::zeros(nn, n);
                for b in 0..nn {
                    for j in 0..n {
                        let mut plus = p.clone();
                        plus.set(b, j, p.get(b, j) + h);
                        let mut minus = p.clone();
                        minus.set(b, j, p.get(b, j) - h);
                        let gp = self.grad(&plus)?;
                        let gm = self.grad(&minus)?;
                        for a in 0..nn {
                            for i in 0..n {
                                t.set(a, i, b, j, (gp.get(a, i) - gm.get(a, i)) / (2.0 * h));
                            }
                        }
                    }
                }
                Ok(t)
            }
        }
    }
}

/// JSON description of a Hamiltonian, keyed by `name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Euclidean {
        #[serde(default)]
        weight: Option<f64>,
    },
    DualOpNorm {
        #[serde(default = "default_gap_tol")]
        gap_tol: f64,
    },
    SegmentFlat {
        eta: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

fn default_gap_tol() -> f64 {
    1e-6
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        HamiltonianSpec::Euclidean { weight: None }
    }
}

impl HamiltonianSpec {
    pub fn build(&self, target_dim: usize, source_dim: usize) -> Result<Hamiltonian> {
        match self {
            HamiltonianSpec::Euclidean { weight } => Ok(Hamiltonian::euclidean_weighted(
                target_dim,
                source_dim,
                weight.unwrap_or(0.5),
            )),
            HamiltonianSpec::DualOpNorm { gap_tol } => {
                Ok(dual_norm_hamiltonian(target_dim, source_dim, *gap_tol))
            }
            HamiltonianSpec::SegmentFlat { eta, a, b } => {
                let h = segment_flat_hamiltonian(eta, a, b)?;
                if h.dims() != (target_dim, source_dim) {
                    return Err(LabError::Config(format!(
                        "segment-flat Hamiltonian is {}x{} but the family is {}x{}",
                        h.target_dim, h.source_dim, target_dim, source_dim
                    )));
                }
                Ok(h)
            }
        }
    }
}

/// Outcome of [`rank1_monotonicity_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityProbe {
    pub holds: bool,
    /// Minimum of `H_P(Q) Q^T : xi (x) xi - |xi^T Q|^2` over the samples.
    pub worst_margin: f64,
    pub samples: usize,
    /// Samples skipped because `H_P` was undefined there.
    pub skipped: usize,
}

/// Random search for violations of `H_P(Q) Q^T : xi (x) xi >= omega(|xi^T Q|)`
/// with `omega(t) = t^2`.
pub fn rank1_monotonicity_probe(
    h: &Hamiltonian,
    samples: usize,
    seed: u64,
) -> Result<MonotonicityProbe> {
    if samples == 0 {
        return Err(LabError::InvalidParameter("samples must be >= 1".into()));
    }
    let (nn, n) = h.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut holds = true;
    let mut skipped = 0;
    for _ in 0..samples {
        let q = Mat::from_fn(nn, n, |_, _| rng.gen_range(-2.0..2.0));
        let xi = loop {
            let v: Vec<f64> = (0..nn).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nv = norm(&v);
            if nv > 1e-3 {
                break v.iter().map(|c| c / nv).collect::<Vec<f64>>();
            }
        };
        let hp = match h.grad(&q) {
            Ok(g) => g,
            Err(LabError::EigenvalueCoalescence { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        // H_P(Q) Q^T : xi (x) xi = (xi^T H_P(Q)) . (xi^T Q)
        let lhs = dot(&hp.apply_transpose(&xi), &q.apply_transpose(&xi));
        let xq = norm(&q.apply_transpose(&xi));
        let omega = xq * xq;
        let margin = lhs - omega;
        worst = worst.min(margin);
        if margin < -1e-12 * (1.0 + omega) {
            holds = false;
        }
    }
    Ok(MonotonicityProbe {
        holds,
        worst_margin: worst,
        samples,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Max error of `grad` against central differences of `eval` with step `step`.
    fn fd_grad_error(h: &Hamiltonian, p: &Mat, step: f64) -> f64 {
        let g = h.grad(p).unwrap();
        let mut worst = 0.0_f64;
        for a in 0..p.rows() {
            for i in 0..p.cols() {
                let mut plus = p.clone();
                plus.set(a, i, p.get(a, i) + step);
                let mut minus = p.clone();
                minus.set(a, i, p.get(a, i) - step);
                let fd = (h.eval(&plus).unwrap() - h.eval(&minus).unwrap()) / (2.0 * step);
                worst = worst.max((fd - g.get(a, i)).abs());
            }
        }
        worst
    }

    #[test]
    fn euclidean_values() {
        let h = euclidean_hamiltonian(2, 2);
        assert_eq!(h.eval(&Mat::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(h.grad(&Mat::zeros(2, 2)).unwrap(), Mat::zeros(2, 2));
        let p = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!((h.eval(&p).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(h.hess(&p).unwrap(), Tensor4::identity(2, 2));
    }

    #[test]
    fn euclidean_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = euclidean_hamiltonian(3, 2);
        for _ in 0..20 {
            let p = random_mat(&mut rng, 3, 2);
            assert!(fd_grad_error(&h, &p, 1e-5) <= 1e-8);
        }
    }

    #[test]
    fn dual_norm_reduces_to_euclidean_for_scalars() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..4 {
            let d = dual_norm_hamiltonian(1, n, 1e-6);
            let e = euclidean_hamiltonian(1, n);
            for _ in 0..50 {
                let p = random_mat(&mut rng, 1, n);
                assert!((d.eval(&p).unwrap() - e.eval(&p).unwrap()).abs() <= 1e-13);
                assert!(d.grad(&p).unwrap().sub(&e.grad(&p).unwrap()).max_abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn dual_norm_on_diagonal() {
        let d = dual_norm_hamiltonian(2, 2, 1e-6);
        let p = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((d.eval(&p).unwrap() - 2.0).abs() < 1e-14);
        let g = d.grad(&p).unwrap();
        let want = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(g.sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn dual_norm_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = dual_norm_hamiltonian(2, 2, 1e-6);
        let mut tested = 0;
        while tested < 20 {
            let p = random_mat(&mut rng, 2, 2);
            let f = max_eigen_field(&p, 1e-6).unwrap();
            if f.eigenvalues[0] - f.eigenvalues[1] <= 0.5 {
                continue;
            }
            assert!(fd_grad_error(&d, &p, 1e-5) <= 1e-6);
            tested += 1;
        }
    }

    #[test]
    fn dual_norm_coalescence_is_an_error() {
        let d = dual_norm_hamiltonian(2, 2, 1e-6);
        assert!(matches!(
            d.grad(&Mat::identity(2)),
            Err(LabError::EigenvalueCoalescence { .. })
        ));
        assert!(d.hess(&Mat::identity(2)).is_err());
        assert!(!d.smooth_everywhere());
    }

    #[test]
    fn gradients_converge_at_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seg = segment_flat_hamiltonian(&[0.6, 0.8], &[1.0, 0.0], &[0.0, 2.0]).unwrap();
        let dual = dual_norm_hamiltonian(2, 2, 1e-6);
        // Quadratic Hamiltonians are reproduced exactly by central differences,
        // so the order check is made on the smooth branch of the dual norm.
        let p = Mat::from_rows(&[vec![1.3, 0.4], vec![-0.2, 0.5]]).unwrap();
        let e1 = fd_grad_error(&dual, &p, 1e-2);
        let e2 = fd_grad_error(&dual, &p, 5e-3);
        assert!((e1 / e2).log2() >= 1.9, "order {}", (e1 / e2).log2());
        for _ in 0..10 {
            let q = random_mat(&mut rng, 2, 2);
            assert!(fd_grad_error(&seg, &q, 1e-3) <= 1e-9);
        }
    }

    #[test]
    fn hessians_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seg = segment_flat_hamiltonian(&[1.0, 0.0], &[1.0, 1.0], &[-1.0, 2.0]).unwrap();
        let dual = dual_norm_hamiltonian(2, 2, 1e-6);
        let p = Mat::from_rows(&[vec![1.5, 0.2], vec![0.1, 0.3]]).unwrap();
        assert!(dual.hess(&p).unwrap().major_asymmetry() <= 1e-8);
        for _ in 0..5 {
            let q = random_mat(&mut rng, 2, 2);
            assert!(seg.hess(&q).unwrap().major_asymmetry() <= 1e-15);
        }
    }

    #[test]
    fn segment_flat_vanishes_on_segment() {
        let eta = [0.6, 0.8];
        let (a, b) = ([1.0, -1.0, 0.5], [0.0, 2.0, 1.0]);
        let h = segment_flat_hamiltonian(&eta, &a, &b).unwrap();
        let pa = Mat::outer(&eta, &a);
        assert!(h.eval(&pa).unwrap().abs() < 1e-15);
        assert!(h.grad(&pa).unwrap().max_abs() < 1e-15);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        assert!(h.eval(&Mat::outer(&eta, &mid)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn segment_flat_distance_oracle() {
        let eta = [1.0, 0.0];
        let (a, b) = ([1.0, 0.0], [1.0, 1.0]);
        let h = segment_flat_hamiltonian(&eta, &a, &b).unwrap();
        // Line offset eta (x) a spans entry (0,0), direction spans (0,1):
        // a unit Q orthogonal to both lives in the second row.
        let q = Mat::from_rows(&[vec![0.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let p = Mat::outer(&eta, &a).add(&q);
        assert!((p.sub(&Mat::outer(&eta, &a)).frobenius_norm() - 1.0).abs() < 1e-15);
        assert!((h.eval(&p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_segment_is_rejected() {
        assert!(matches!(
            segment_flat_hamiltonian(&[1.0, 0.0], &[1.0, 2.0], &[1.0, 2.0]),
            Err(LabError::DegenerateSegment)
        ));
        assert!(segment_flat_hamiltonian(&[0.0, 0.0], &[1.0], &[2.0]).is_err());
    }

    #[test]
    fn monotonicity_probe() {
        let e = euclidean_hamiltonian(2, 3);
        let r = rank1_monotonicity_probe(&e, 500, 9).unwrap();
        assert!(r.holds);
        assert!(r.worst_margin.abs() < 1e-12);

        let h = segment_flat_hamiltonian(&[0.6, 0.8], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        let r = rank1_monotonicity_probe(&h, 500, 9).unwrap();
        assert!(!r.holds);
        assert!(r.worst_margin < 0.0);
        assert!(rank1_monotonicity_probe(&h, 0, 9).is_err());
    }

    #[test]
    fn monotonicity_margin_at_zero() {
        let e = euclidean_hamiltonian(2, 2);
        let q = Mat::zeros(2, 2);
        let hp = e.grad(&q).unwrap();
        let xi = [1.0, 0.0];
        assert_eq!(dot(&hp.apply_transpose(&xi), &q.apply_transpose(&xi)), 0.0);
    }

    #[test]
    fn spec_round_trip() {
        let s: HamiltonianSpec =
            serde_json::from_str(r#"{"name":"segment-flat","eta":[1,0],"a":[1,0],"b":[0,1]}"#)
                .unwrap();
        assert_eq!(s.build(2, 2).unwrap().name(), "segment-flat");
        let s: HamiltonianSpec = serde_json::from_str(r#"{"name":"dual-op-norm"}"#).unwrap();
        assert_eq!(s, HamiltonianSpec::DualOpNorm { gap_tol: 1e-6 });
        assert!(serde_json::from_str::<HamiltonianSpec>(r#"{"name":"quasiconformal"}"#).is_err());
    }
}
