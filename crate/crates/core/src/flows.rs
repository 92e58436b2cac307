//! Gradient flows along `xi^T Du` and the horizontal/vertical phase split.
//!
//! Integration is classical RK4 with a constant step. A trace stops early
//! (with a [`Termination`] flag, not an error) when it would leave the family
//! domain or when the rank of `H_P(Du)` changes.

use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::svd_projections;
use crate::operators::projected_inf_laplacian;
use crate::solutions::MapFamily;
use crate::tensor::{dot, norm, Jet, Mat};
use serde::Serialize;
use std::collections::BTreeMap;

const XI_TOL: f64 = 1e-12;
/// Membership threshold for the horizontal and vertical sets.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    BoundaryExit { t: f64 },
    RankJump { t: f64, from: usize, to: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowParams {
    pub family: String,
    pub x0: Vec<f64>,
    /// `xi` for the tangential flow, `e(x0)` for the horizontal flow.
    pub direction: Vec<f64>,
    pub step: f64,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub params: FlowParams,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub monitors: BTreeMap<String, Vec<f64>>,
    pub termination: Termination,
}

impl FlowTrace {
    pub fn monitor(&self, name: &str) -> &[f64] {
        self.monitors.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Largest deviation of a monitor from its initial value.
    pub fn drift(&self, name: &str) -> f64 {
        let m = self.monitor(name);
        m.first()
            .map(|m0| m.iter().map(|v| (v - m0).abs()).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    /// Smallest consecutive increment of a monitor.
    pub fn min_increment(&self, name: &str) -> f64 {
        self.monitor(name)
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with `#`-prefixed header lines, then `t, x_1..x_n, monitors...`.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = format!(
            "# family={}\n# direction={:?}\n# step={}\n# method={}\n# termination={}\n",
            self.params.family,
            self.params.direction,
            self.params.step,
            self.params.method,
            serde_json::to_string(&self.termination)?
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        let n = self.params.x0.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend(self.monitors.keys().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.points[k].iter().map(f64::to_string));
            row.extend(self.monitors.values().map(|m| m[k].to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| LabError::Config(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| LabError::Config(e.to_string()))?);
        Ok(out)
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Config(format!("csv: {e}"))
}

fn check_step(step: f64, t_end: f64) -> Result<usize> {
    if !(step > 0.0) || !(t_end >= 0.0) || !step.is_finite() || !t_end.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "step {step}, t_end {t_end}"
        )));
    }
    Ok((t_end / step).round() as usize)
}

fn rk4_step(f: &impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let shift =
        |k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = f(x)?;
    let k2 = f(&shift(&k1, 0.5 * h))?;
    let k3 = f(&shift(&k2, 0.5 * h))?;
    let k4 = f(&shift(&k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// `d/dt Phi = Du(Phi)^T xi` from `x0`, monitoring `|Du(Phi)|` (`grad_norm`)
/// and `xi^T u(Phi)` (`xi_u`).
pub fn tangential_flow(
    family: &MapFamily,
    x0: &[f64],
    xi: &[f64],
    t_end: f64,
    step: f64,
) -> Result<FlowTrace> {
    let steps = check_step(step, t_end)?;
    if xi.len() != family.target_dim() {
        return Err(LabError::DimensionMismatch("xi vs target dimension".into()));
    }
    let speed = norm(&family.grad(x0)?.apply_transpose(xi));
    if speed <= XI_TOL {
        return Err(LabError::StartOutsideXi(speed));
    }
    let velocity = |x: &[f64]| -> Result<Vec<f64>> { Ok(family.grad(x)?.apply_transpose(xi)) };
    let record = |x: &[f64], mons: &mut BTreeMap<String, Vec<f64>>| -> Result<()> {
        let g = family.grad(x)?;
        mons.entry("grad_norm".into())
            .or_default()
            .push(g.frobenius_norm());
        mons.entry("xi_u".into())
            .or_default()
            .push(dot(xi, &family.value(x)?));
        Ok(())
    };
    let mut trace = FlowTrace {
        params: FlowParams {
            family: family.name.clone(),
            x0: x0.to_vec(),
            direction: xi.to_vec(),
            step,
            method: "rk4",
        },
        times: vec![0.0],
        points: vec![x0.to_vec()],
        monitors: BTreeMap::new(),
        termination: Termination::Completed,
    };
    record(x0, &mut trace.monitors)?;
    let mut x = x0.to_vec();
    for k in 1..=steps {
        let next = rk4_step(&velocity, &x, step)?;
        let t = k as f64 * step;
        if family.domain.margin(&next) <= 0.0 {
            trace.termination = Termination::BoundaryExit { t };
            break;
        }
        record(&next, &mut trace.monitors)?;
        trace.times.push(t);
        trace.points.push(next.clone());
        x = next;
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// Max over interior samples of `|d/dt eta^T u(Phi) - xi (x) eta : Du Du^T|`.
    pub first_derivative: f64,
    /// Max of `|d^2/dt^2 xi^T u(Phi) - 2 Delta_inf(xi^T u)(Phi)|`, when `eta = xi`.
    pub second_derivative: Option<f64>,
    pub samples: usize,
}

/// Checks the trajectory identities of the tangential flow by central
/// differences in `t` along a computed trace.
pub fn trajectory_identities(
    trace: &FlowTrace,
    family: &MapFamily,
    xi: &[f64],
    eta: &[f64],
) -> Result<IdentityReport> {
    let m = trace.points.len();
    if m < 5 {
        return Err(LabError::InvalidParameter(format!(
            "trace too short ({m} points)"
        )));
    }
    let dt = trace.params.step;
    let proj = |w: &[f64]| -> Result<Vec<f64>> {
        trace
            .points
            .iter()
            .map(|x| Ok(dot(w, &family.value(x)?)))
            .collect()
    };
    let eta_u = proj(eta)?;
    let same = xi == eta;
    let xi_u = if same { eta_u.clone() } else { proj(xi)? };
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    for k in 1..m - 1 {
        let x = &trace.points[k];
        let g = family.grad(x)?;
        let closed = dot(&g.apply_transpose(xi), &g.apply_transpose(eta));
        let fd = (eta_u[k + 1] - eta_u[k - 1]) / (2.0 * dt);
        first = first.max((fd - closed).abs());
        if same {
            let lap = projected_inf_laplacian(&family.jet(x)?, xi);
            let fd2 = (xi_u[k + 1] - 2.0 * xi_u[k] + xi_u[k - 1]) / (dt * dt);
            second = second.max((fd2 - 2.0 * lap).abs());
        }
    }
    Ok(IdentityReport {
        first_derivative: first,
        second_derivative: same.then_some(second),
        samples: m - 2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSplit {
    /// `[H_P(Du)]^T e`.
    pub h: Vec<f64>,
    /// `[H_P(Du)]^perp e`.
    pub v: Vec<f64>,
    pub horizontal: bool,
    pub vertical: bool,
    pub rank: usize,
}

/// Orthogonal split `e = h + v` along the range of `H_P(Du)` and the null
/// space of its transpose.
pub fn phase_split(h: &Hamiltonian, grad: &Mat, e: &[f64], rank_tol: f64) -> Result<PhaseSplit> {
    if e.len() != grad.rows() {
        return Err(LabError::DimensionMismatch("e vs target dimension".into()));
    }
    let proj = svd_projections(&h.grad(grad)?, rank_tol)?;
    let hv = proj.tangential.apply(e);
    let vv = proj.normal.apply(e);
    Ok(PhaseSplit {
        horizontal: norm(&hv) > MEMBERSHIP_TOL,
        vertical: norm(&vv) > MEMBERSHIP_TOL,
        h: hv,
        v: vv,
        rank: proj.rank,
    })
}

/// `d/dt Phi = H_P(Du(Phi))^T h(Phi)` with `h` the horizontal part of
/// `e_field(Phi)`. Monitors `hamiltonian` (`H(Du(Phi))`), `rank`, and
/// `inequality_margin` (`h^T d/dt u(Phi) - |h^T Du|^2`).
pub fn horizontal_flow(
    h: &Hamiltonian,
    family: &MapFamily,
    x0: &[f64],
    e_field: impl Fn(&[f64]) -> Vec<f64>,
    t_end: f64,
    step: f64,
    rank_tol: f64,
) -> Result<FlowTrace> {
    let steps = check_step(step, t_end)?;
    let split0 = phase_split(h, &family.grad(x0)?, &e_field(x0), rank_tol)?;
    if !split0.horizontal {
        return Err(LabError::StartInVerticalSet(norm(&split0.h)));
    }
    let velocity = |x: &[f64]| -> Result<Vec<f64>> {
        let g = family.grad(x)?;
        let s = phase_split(h, &g, &e_field(x), rank_tol)?;
        Ok(h.grad(&g)?.apply_transpose(&s.h))
    };
    let sample = |x: &[f64]| -> Result<(f64, usize, f64)> {
        let g = family.grad(x)?;
        let s = phase_split(h, &g, &e_field(x), rank_tol)?;
        let vel = h.grad(&g)?.apply_transpose(&s.h);
        let du_dt = g.apply(&vel);
        let hdu = norm(&g.apply_transpose(&s.h));
        Ok((h.eval(&g)?, s.rank, dot(&s.h, &du_dt) - hdu * hdu))
    };
    let mut trace = FlowTrace {
        params: FlowParams {
            family: family.name.clone(),
            x0: x0.to_vec(),
            direction: e_field(x0),
            step,
            method: "rk4",
        },
        times: vec![0.0],
        points: vec![x0.to_vec()],
        monitors: BTreeMap::new(),
        termination: Termination::Completed,
    };
    let push = |mons: &mut BTreeMap<String, Vec<f64>>, (hv, r, m): (f64, usize, f64)| {
        mons.entry("hamiltonian".into()).or_default().push(hv);
        mons.entry("rank".into()).or_default().push(r as f64);
        mons.entry("inequality_margin".into()).or_default().push(m);
    };
    push(&mut trace.monitors, sample(x0)?);
    let rank0 = split0.rank;
    let mut x = x0.to_vec();
    for k in 1..=steps {
        let next = rk4_step(&velocity, &x, step)?;
        let t = k as f64 * step;
        if family.domain.margin(&next) <= 0.0 {
            trace.termination = Termination::BoundaryExit { t };
            break;
        }
        let s = sample(&next)?;
        if s.1 != rank0 {
            trace.termination = Termination::RankJump {
                t,
                from: rank0,
                to: s.1,
            };
            break;
        }
        push(&mut trace.monitors, s);
        trace.times.push(t);
        trace.points.push(next.clone());
        x = next;
    }
    Ok(trace)
}

/// Residuals of the vertical-set system: `r1 = v^T Du` and
/// `r2 = Dv : H_P(Du)`.
pub fn vertical_system_residual(
    h: &Hamiltonian,
    jet: &Jet,
    v: &[f64],
    dv: &Mat,
) -> Result<(Vec<f64>, f64)> {
    if v.len() != jet.target_dim() || dv.dims() != jet.grad.dims() {
        return Err(LabError::DimensionMismatch("v / Dv vs jet".into()));
    }
    let r1 = jet.grad.apply_transpose(v);
    let r2 = dv.frobenius_dot(&h.grad(&jet.grad)?);
    Ok((r1, r2))
}

/// `Dv` by central differences of the vertical part of `e_field` over the
/// family.
pub fn vertical_field_derivative(
    h: &Hamiltonian,
    family: &MapFamily,
    x: &[f64],
    e_field: impl Fn(&[f64]) -> Vec<f64>,
    step: f64,
    rank_tol: f64,
) -> Result<Mat> {
    let n = family.source_dim();
    let nn = family.target_dim();
    let mut dv = Mat::zeros(nn, n);
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += step;
        xm[i] -= step;
        let vp = phase_split(h, &family.grad(&xp)?, &e_field(&xp), rank_tol)?.v;
        let vm = phase_split(h, &family.grad(&xm)?, &e_field(&xm), rank_tol)?.v;
        for a in 0..nn {
            dv.set(a, i, (vp[a] - vm[a]) / (2.0 * step));
        }
    }
    Ok(dv)
}
