//! Pointwise evaluation of the L-infinity PDE operators on jets.
//!
//! Every operator consumes a [`Jet`] `(u, Du, D^2u)` at a point and never a
//! map, so analytic jets and finite-difference jets share one code path.
//! Operators built from a tangential/normal split return an
//! [`OperatorReport`] whose `value` is the sum of the two parts.

use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::{
    h_jacobian, jacobian, max_eigen_field, svd_projections, symmetric_eigen, ProjectionPair,
};
use crate::tensor::{add, contract, dot, Jet, Mat, Sym3, Tensor4};
use serde::Serialize;

/// Default central-difference step for the eigenvector field derivative.
pub const EIGEN_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    pub value: Vec<f64>,
    pub tangential_part: Vec<f64>,
    pub normal_part: Vec<f64>,
    /// Rank of `H_P(Du)` (of `Du` for the Euclidean operators).
    pub rank_of_hp: usize,
    /// Set when the rank decision sits inside the ambiguity band.
    pub degenerate: Option<String>,
}

impl OperatorReport {
    fn from_parts(tangential: Vec<f64>, normal: Vec<f64>, proj: &ProjectionPair) -> Self {
        let degenerate = proj.ambiguous.then(|| {
            format!(
                "rank {} is tolerance-sensitive (singular values {:?})",
                proj.rank, proj.singular_values
            )
        });
        Self {
            value: add(&tangential, &normal),
            tangential_part: tangential,
            normal_part: normal,
            rank_of_hp: proj.rank,
            degenerate,
        }
    }
}

/// `(A_{T,inf} u)_alpha = H_{P_{alpha i}} H_{P_{beta j}} D^2_{ij} u_beta`,
/// i.e. `H_P(Du) (x) H_P(Du) : D^2u`.
pub fn tangential_aronsson(h: &Hamiltonian, jet: &Jet) -> Result<Vec<f64>> {
    let hp = h.grad(&jet.grad)?;
    contract(&Tensor4::outer(&hp, &hp), &jet.hess)
}

/// `(Delta_{T,inf} u)_alpha = D_i u_alpha D_j u_beta D^2_{ij} u_beta`, by index loops.
pub fn tangential_inf_laplacian(jet: &Jet) -> Vec<f64> {
    let du = &jet.grad;
    let (nn, n) = du.dims();
    let mut out = vec![0.0; nn];
    for (alpha, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                for beta in 0..nn {
                    *o += du.get(alpha, i) * du.get(beta, j) * jet.hess.get(beta, i, j);
                }
            }
        }
    }
    out
}

/// The complete Aronsson system
/// `(H_P (x) H_P + H(Du) [H_P]^perp H_PP) : D^2u`.
///
/// When `H_P(Du) = 0` the normal projection is the identity, so the normal part
/// is `H(Du) (H_PP : D^2u)`.
pub fn full_aronsson(h: &Hamiltonian, jet: &Jet, rank_tol: f64) -> Result<OperatorReport> {
    let hp = h.grad(&jet.grad)?;
    let tangential = contract(&Tensor4::outer(&hp, &hp), &jet.hess)?;
    let proj = svd_projections(&hp, rank_tol)?;
    let hpp_d2u = contract(&h.hess(&jet.grad)?, &jet.hess)?;
    let coeff = h.eval(&jet.grad)?;
    let normal = proj
        .normal
        .apply(&hpp_d2u)
        .into_iter()
        .map(|v| coeff * v)
        .collect();
    Ok(OperatorReport::from_parts(tangential, normal, &proj))
}

/// `Delta_inf u = Du (x) Du : D^2u + |Du|^2 [Du]^perp Delta u`.
pub fn inf_laplacian(jet: &Jet, rank_tol: f64) -> Result<OperatorReport> {
    let proj = svd_projections(&jet.grad, rank_tol)?;
    let speed2 = jet.grad.frobenius_dot(&jet.grad);
    let normal = proj
        .normal
        .apply(&jet.hess.traces())
        .into_iter()
        .map(|v| speed2 * v)
        .collect();
    Ok(OperatorReport::from_parts(
        tangential_inf_laplacian(jet),
        normal,
        &proj,
    ))
}

/// `Gamma_inf u = Du (x) Du : D^2u + (Ju)^2 [Du]^perp Delta u`.
pub fn gamma_inf(jet: &Jet, rank_tol: f64) -> Result<OperatorReport> {
    let proj = svd_projections(&jet.grad, rank_tol)?;
    let j = jacobian(&jet.grad);
    let normal = proj
        .normal
        .apply(&jet.hess.traces())
        .into_iter()
        .map(|v| j * j * v)
        .collect();
    Ok(OperatorReport::from_parts(
        tangential_inf_laplacian(jet),
        normal,
        &proj,
    ))
}

/// General-Hamiltonian modification with continuous coefficients:
/// `(H_P (x) H_P + (J_H u)^2 [H_P]^perp H_PP) : D^2u`.
pub fn gamma_aronsson(h: &Hamiltonian, jet: &Jet, rank_tol: f64) -> Result<OperatorReport> {
    let hp = h.grad(&jet.grad)?;
    let tangential = contract(&Tensor4::outer(&hp, &hp), &jet.hess)?;
    let proj = svd_projections(&hp, rank_tol)?;
    let hpp_d2u = contract(&h.hess(&jet.grad)?, &jet.hess)?;
    let jh = h_jacobian(h, &jet.grad)?;
    let normal = proj
        .normal
        .apply(&hpp_d2u)
        .into_iter()
        .map(|v| jh * jh * v)
        .collect();
    Ok(OperatorReport::from_parts(tangential, normal, &proj))
}

/// The top eigenvector field `e` of `Du Du^T` at a point and its derivative
/// `De[alpha][i] = D_i e_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFieldJet {
    pub e: Vec<f64>,
    pub de: Mat,
}

impl EigenFieldJet {
    /// Central differences of `max_eigen_field` along the quadratic Taylor
    /// extension of the jet, with sign continuity against `e(x)`.
    pub fn from_jet_fd(jet: &Jet, gap_tol: f64, step: f64) -> Result<Self> {
        let (nn, n) = jet.grad.dims();
        let e = strict_field(&jet.grad, gap_tol)?;
        let mut de = Mat::zeros(nn, n);
        for i in 0..n {
            let mut offset = vec![0.0; n];
            offset[i] = step;
            let plus = aligned(strict_field(&jet.extended_grad(&offset), gap_tol)?, &e);
            offset[i] = -step;
            let minus = aligned(strict_field(&jet.extended_grad(&offset), gap_tol)?, &e);
            for a in 0..nn {
                de.set(a, i, (plus[a] - minus[a]) / (2.0 * step));
            }
        }
        Ok(Self { e, de })
    }

    /// First-order eigenvector perturbation:
    /// `D_i e = sum_{k>1} (v_k . dM_i e) / (lambda_1 - lambda_k) v_k` with
    /// `dM_i = D_i(Du) Du^T + Du D_i(Du)^T`.
    pub fn from_jet_analytic(jet: &Jet, gap_tol: f64) -> Result<Self> {
        let (nn, n) = jet.grad.dims();
        let e = strict_field(&jet.grad, gap_tol)?;
        let gram = jet.grad.matmul(&jet.grad.transpose())?;
        let (vals, vecs) = symmetric_eigen(&gram);
        let mut de = Mat::zeros(nn, n);
        for i in 0..n {
            let s = jet.hess.slice(i);
            let dm = s
                .matmul(&jet.grad.transpose())?
                .add(&jet.grad.matmul(&s.transpose())?);
            let dme = dm.apply(&e);
            for k in 1..nn {
                let coef = dot(&vecs[k], &dme) / (vals[0] - vals[k]);
                for a in 0..nn {
                    de.set(a, i, de.get(a, i) + coef * vecs[k][a]);
                }
            }
        }
        Ok(Self { e, de })
    }

    /// The same field with `e -> -e` (and `De -> -De`).
    pub fn flipped(&self) -> Self {
        Self {
            e: self.e.iter().map(|v| -v).collect(),
            de: self.de.scale(-1.0),
        }
    }
}

fn strict_field(p: &Mat, gap_tol: f64) -> Result<Vec<f64>> {
    let f = max_eigen_field(p, gap_tol)?;
    if !f.strict {
        return Err(LabError::EigenvalueCoalescence {
            gap: f.relative_gap,
            gap_tol,
        });
    }
    Ok(f.e)
}

fn aligned(mut v: Vec<f64>, reference: &[f64]) -> Vec<f64> {
    if dot(&v, reference) < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    v
}

/// `Div(e (x) e Du)_alpha = D_i(e_alpha e_beta D_i u_beta)` expanded by the
/// product rule from `(e, De, Du, D^2u)`.
pub fn div_e_e_du(jet: &Jet, field: &EigenFieldJet) -> Vec<f64> {
    let (nn, n) = jet.grad.dims();
    let (e, de, du) = (&field.e, &field.de, &jet.grad);
    let mut out = vec![0.0; nn];
    for (alpha, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            for beta in 0..nn {
                *o += de.get(alpha, i) * e[beta] * du.get(beta, i)
                    + e[alpha] * de.get(beta, i) * du.get(beta, i)
                    + e[alpha] * e[beta] * jet.hess.get(beta, i, i);
            }
        }
    }
    out
}

/// The dual infinity-Laplacian
/// `(e^T Du) (x) (e^T Du) : (e^T D^2u) e + e^perp Div(e (x) e Du)`.
///
/// Undefined (an error) where the top eigenvalue of `Du Du^T` is not strict.
pub fn dual_inf_laplacian(jet: &Jet, field: &EigenFieldJet, gap_tol: f64) -> Result<Vec<f64>> {
    let nn = jet.target_dim();
    if field.e.len() != nn || field.de.dims() != jet.grad.dims() {
        return Err(LabError::DimensionMismatch("eigen field vs jet".into()));
    }
    strict_field(&jet.grad, gap_tol)?;
    let e = &field.e;
    let q = jet.grad.apply_transpose(e);
    let eh = jet.hess.weighted(e);
    let first = dot(&q, &eh.apply(&q));
    let div = div_e_e_du(jet, field);
    let ediv = dot(e, &div);
    Ok((0..nn)
        .map(|a| first * e[a] + (div[a] - e[a] * ediv))
        .collect())
}

/// `Du D(1/2 |Du|^2) + |Du|^2 [Du]^perp Div(Du)` evaluated from the jet.
pub fn contracted_inf_system(jet: &Jet, rank_tol: f64) -> Result<Vec<f64>> {
    let du = &jet.grad;
    let (nn, n) = du.dims();
    // D_j(1/2 |Du|^2) = D_i u_beta D^2_{ij} u_beta
    let d_half_sq: Vec<f64> = (0..n)
        .map(|j| {
            let mut s = 0.0;
            for i in 0..n {
                for beta in 0..nn {
                    s += du.get(beta, i) * jet.hess.get(beta, i, j);
                }
            }
            s
        })
        .collect();
    let first = du.apply(&d_half_sq);
    let proj = svd_projections(du, rank_tol)?;
    let speed2 = du.frobenius_dot(du);
    let div: Vec<f64> = (0..nn)
        .map(|a| (0..n).map(|i| jet.hess.get(a, i, i)).sum())
        .collect();
    let normal = proj.normal.apply(&div);
    Ok((0..nn).map(|a| first[a] + speed2 * normal[a]).collect())
}

/// First-order data of the contracted Aronsson system: `D(H(Du))` (length `n`)
/// and `Div(H_P(Du))` (length `N`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractedData {
    pub d_energy: Vec<f64>,
    pub div_hp: Vec<f64>,
}

impl ContractedData {
    /// Chain rule: `D_j H(Du) = H_{P_{alpha i}} D^2_{ij} u_alpha`,
    /// `Div(H_P(Du))_alpha = H_{P_{alpha i} P_{beta j}} D^2_{ij} u_beta`.
    pub fn from_jet(h: &Hamiltonian, jet: &Jet) -> Result<Self> {
        let (nn, n) = jet.grad.dims();
        let hp = h.grad(&jet.grad)?;
        let d_energy = (0..n)
            .map(|j| {
                let mut s = 0.0;
                for a in 0..nn {
                    for i in 0..n {
                        s += hp.get(a, i) * jet.hess.get(a, i, j);
                    }
                }
                s
            })
            .collect();
        let div_hp = contract(&h.hess(&jet.grad)?, &jet.hess)?;
        Ok(Self { d_energy, div_hp })
    }
}

/// `H_P(Du) D(H(Du)) + H(Du) [H_P(Du)]^perp Div(H_P(Du))` from first-order data,
/// so it is meaningful for maps whose Hessian does not exist.
pub fn contracted_aronsson_system(
    h: &Hamiltonian,
    grad: &Mat,
    data: &ContractedData,
    rank_tol: f64,
) -> Result<Vec<f64>> {
    let (nn, n) = grad.dims();
    if data.d_energy.len() != n || data.div_hp.len() != nn {
        return Err(LabError::DimensionMismatch(
            "contracted data vs gradient".into(),
        ));
    }
    let hp = h.grad(grad)?;
    let first = hp.apply(&data.d_energy);
    let proj = svd_projections(&hp, rank_tol)?;
    let coeff = h.eval(grad)?;
    let normal = proj.normal.apply(&data.div_hp);
    Ok((0..nn).map(|a| first[a] + coeff * normal[a]).collect())
}

/// The rescaled p-Euler-Lagrange system
/// `H_P (x) H_P : D^2u + H(Du)/(p-1) H_PP : D^2u`.
pub fn p_euler_lagrange_residual(h: &Hamiltonian, jet: &Jet, p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "p must exceed 1, got {p}"
        )));
    }
    let hp = h.grad(&jet.grad)?;
    let tangential = contract(&Tensor4::outer(&hp, &hp), &jet.hess)?;
    let hpp_d2u = contract(&h.hess(&jet.grad)?, &jet.hess)?;
    let coeff = h.eval(&jet.grad)? / (p - 1.0);
    Ok(tangential
        .iter()
        .zip(&hpp_d2u)
        .map(|(t, z)| t + coeff * z)
        .collect())
}

/// The two sides of the renormalised p-system:
/// `lhs = (H_P (x) H_P + H [H_P]^perp H_PP) : D^2u`,
/// `rhs = -(H/(p-1)) [H_P]^T H_PP : D^2u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSplit {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub rank_of_hp: usize,
}

pub fn residual_split(h: &Hamiltonian, jet: &Jet, p: f64, rank_tol: f64) -> Result<ResidualSplit> {
    if !(p > 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "p must exceed 1, got {p}"
        )));
    }
    let hp = h.grad(&jet.grad)?;
    let tangential = contract(&Tensor4::outer(&hp, &hp), &jet.hess)?;
    let proj = svd_projections(&hp, rank_tol)?;
    let hpp_d2u = contract(&h.hess(&jet.grad)?, &jet.hess)?;
    let hv = h.eval(&jet.grad)?;
    let normal = proj.normal.apply(&hpp_d2u);
    let tang = proj.tangential.apply(&hpp_d2u);
    Ok(ResidualSplit {
        lhs: tangential
            .iter()
            .zip(&normal)
            .map(|(t, n)| t + hv * n)
            .collect(),
        rhs: tang.iter().map(|t| -hv / (p - 1.0) * t).collect(),
        rank_of_hp: proj.rank,
    })
}

/// Scalar infinity-Laplacian `Dw^T D^2w Dw` of the projection `w = xi^T u`.
pub fn projected_inf_laplacian(jet: &Jet, xi: &[f64]) -> f64 {
    let dw = jet.grad.apply_transpose(xi);
    let d2w = jet.hess.weighted(xi);
    dot(&dw, &d2w.apply(&dw))
}

/// Jet of the scalar map `w = xi^T u`.
pub fn project_jet(jet: &Jet, xi: &[f64]) -> Result<Jet> {
    let n = jet.source_dim();
    let dw = jet.grad.apply_transpose(xi);
    let d2w = jet.hess.weighted(xi);
    Jet::new(
        jet.point.clone(),
        vec![dot(xi, &jet.value)],
        Mat::new(1, n, dw)?,
        Sym3::new(1, n, d2w.as_slice().to_vec())?,
    )
}

/// Largest discrepancies of the identities linking the operators, over
/// random jets with symmetric Hessians.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySuite {
    pub samples: usize,
    /// Euclidean `H`: complete vs infinity-Laplacian tangential parts.
    pub tangential_specialisation: f64,
    /// Euclidean `H`: complete normal part vs half the infinity-Laplacian one.
    pub normal_specialisation: f64,
    pub contracted_inf: f64,
    pub contracted_aronsson: f64,
    /// Normal part of the complete system for scalar maps.
    pub scalar_normal: f64,
    /// `Gamma_inf - Delta_inf` for curves.
    pub gamma_on_curves: f64,
    /// `e e^T Delta_dual - A_{T,inf}` for the dual norm, eigen-gap `>= 0.5`.
    pub dual_projection: f64,
    /// `Delta_dual(e) - Delta_dual(-e)`.
    pub dual_sign_flip: f64,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random jet with entries uniform in `[-1, 1]`.
pub fn random_jet<R: rand::Rng>(rng: &mut R, target_dim: usize, source_dim: usize) -> Jet {
    let g = Mat::from_fn(target_dim, source_dim, |_, _| rng.gen_range(-1.0..1.0));
    let mut x = Sym3::zeros(target_dim, source_dim);
    for a in 0..target_dim {
        for i in 0..source_dim {
            for j in i..source_dim {
                x.set_sym(a, i, j, rng.gen_range(-1.0..1.0));
            }
        }
    }
    Jet::new(vec![0.0; source_dim], vec![0.0; target_dim], g, x).expect("consistent shapes")
}

pub fn identity_suite(samples: usize, seed: u64) -> Result<IdentitySuite> {
    use crate::hamiltonians::{dual_norm_hamiltonian, euclidean_hamiltonian};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let tol = crate::linalg::DEFAULT_RANK_TOL;
    let mut out = IdentitySuite {
        samples,
        tangential_specialisation: 0.0,
        normal_specialisation: 0.0,
        contracted_inf: 0.0,
        contracted_aronsson: 0.0,
        scalar_normal: 0.0,
        gamma_on_curves: 0.0,
        dual_projection: 0.0,
        dual_sign_flip: 0.0,
    };
    let shapes = [(1, 2), (2, 1), (2, 2), (3, 2), (2, 3)];
    let dual_h = dual_norm_hamiltonian(2, 2, 1e-6);
    for k in 0..samples {
        let (nn, n) = shapes[k % shapes.len()];
        let e = euclidean_hamiltonian(nn, n);
        let j = random_jet(&mut rng, nn, n);
        let full = full_aronsson(&e, &j, tol)?;
        let lap = inf_laplacian(&j, tol)?;
        let half: Vec<f64> = lap.normal_part.iter().map(|v| 0.5 * v).collect();
        out.tangential_specialisation = out
            .tangential_specialisation
            .max(sup_diff(&full.tangential_part, &lap.tangential_part));
        out.normal_specialisation = out
            .normal_specialisation
            .max(sup_diff(&full.normal_part, &half));
        out.contracted_inf = out
            .contracted_inf
            .max(sup_diff(&contracted_inf_system(&j, tol)?, &lap.value));
        let data = ContractedData::from_jet(&e, &j)?;
        let c = contracted_aronsson_system(&e, &j.grad, &data, tol)?;
        out.contracted_aronsson = out.contracted_aronsson.max(sup_diff(&c, &full.value));
        if nn == 1 {
            out.scalar_normal = out.scalar_normal.max(full.normal_part[0].abs());
        }
        if n == 1 {
            out.gamma_on_curves = out
                .gamma_on_curves
                .max(sup_diff(&gamma_inf(&j, tol)?.value, &lap.value));
        }
        let dj = loop {
            let cand = random_jet(&mut rng, 2, 2);
            let f = max_eigen_field(&cand.grad, 1e-6)?;
            if f.eigenvalues[0] - f.eigenvalues[1] >= 0.5 {
                break cand;
            }
        };
        let field = EigenFieldJet::from_jet_fd(&dj, 1e-6, EIGEN_FD_STEP)?;
        let dual = dual_inf_laplacian(&dj, &field, 1e-6)?;
        let proj = Mat::outer(&field.e, &field.e).apply(&dual);
        out.dual_projection = out
            .dual_projection
            .max(sup_diff(&proj, &tangential_aronsson(&dual_h, &dj)?));
        let flipped = dual_inf_laplacian(&dj, &field.flipped(), 1e-6)?;
        out.dual_sign_flip = out.dual_sign_flip.max(sup_diff(&dual, &flipped));
    }
    Ok(out)
}
