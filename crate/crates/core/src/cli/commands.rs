use super::{
    load_config, parse_family, parse_floats, parse_hamiltonian, Assertion, CliError, CommonArgs,
    Floats, Outcome, RegionSpec,
};
use crate::error::LabError;
use crate::flows::{
    horizontal_flow, tangential_flow, trajectory_identities, IdentityReport, Termination,
};
use crate::hamiltonians::HamiltonianSpec;
use crate::linalg::DEFAULT_RANK_TOL;
use crate::operators::{
    contracted_inf_system, dual_inf_laplacian, full_aronsson, gamma_aronsson, gamma_inf,
    identity_suite, inf_laplacian, tangential_aronsson, tangential_inf_laplacian, EigenFieldJet,
    IdentitySuite,
};
use crate::relaxation::{
    am_perturbation_probe, competitor_probe, lip_estimate, p_sweep_diagnostics, sup_operator_norm,
    sup_over_region, AmProbe, GridField, LipEstimate, SolverParams, SweepReport,
};
use crate::solutions::{interface_locus, Domain, FamilySpec, GridSpec, InterfacePoint, MapFamily};
use crate::tensor::{norm, Jet};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn csv_string(
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, CliError> {
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))
}

fn key_value_csv(pairs: &[(&str, f64)]) -> Result<String, CliError> {
    csv_string(
        &["key".to_string(), "value".to_string()],
        pairs
            .iter()
            .map(|(k, v)| vec![k.to_string(), v.to_string()]),
    )
}

/// Tensor grid with `res` points per axis over the bounding box of `region`,
/// keeping points of the closed region that lie in the open family domain.
fn region_grid(family: &MapFamily, region: &Domain, res: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if res < 2 {
        return Err(CliError::Config(format!(
            "res must be at least 2, got {res}"
        )));
    }
    let (lo, hi) = region.bounds();
    let n = lo.len();
    let total = res.checked_pow(n as u32).filter(|t| *t <= 10_000_000);
    let Some(total) = total else {
        return Err(CliError::Config(format!("grid {res}^{n} is too large")));
    };
    let mut out = Vec::new();
    for k in 0..total {
        let mut rem = k;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let i = rem % res;
                rem /= res;
                lo[d] + (hi[d] - lo[d]) * i as f64 / (res - 1) as f64
            })
            .collect();
        if region.margin(&x) >= -1e-12 && family.domain.margin(&x) > 0.0 {
            out.push(x);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorName {
    /// Infinity-Laplacian `Du (x) Du : D^2u + |Du|^2 [Du]^perp Delta u`.
    DeltaInf,
    /// `Du (x) Du : D^2u`.
    TangentialInf,
    /// Complete Aronsson system of the configured Hamiltonian.
    Aronsson,
    TangentialAronsson,
    /// Infinity-Laplacian with `(Ju)^2` as normal coefficient.
    GammaInf,
    GammaAronsson,
    /// Dual infinity-Laplacian (top eigenvector field of `Du Du^T`).
    DualInf,
    /// Contracted form of the infinity-Laplacian.
    ContractedInf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub family: FamilySpec,
    pub hamiltonian: HamiltonianSpec,
    pub operator: OperatorName,
    pub region: RegionSpec,
    pub res: usize,
    pub rank_tol: f64,
    pub gap_tol: f64,
    /// Passes when the largest residual norm is at most this.
    pub max_residual: Option<f64>,
    /// Passes when the largest residual norm exceeds this.
    pub min_residual: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::ExpDiff,
            hamiltonian: HamiltonianSpec::default(),
            operator: OperatorName::DeltaInf,
            region: RegionSpec::default(),
            res: 101,
            rank_tol: DEFAULT_RANK_TOL,
            gap_tol: 1e-6,
            max_residual: None,
            min_residual: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<FamilySpec>,
    #[arg(long, value_parser = parse_hamiltonian)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[arg(long, value_enum)]
    pub operator: Option<OperatorName>,
    /// `rhombus-inset 0.1`, `domain-inset 0.05` or `lo,hi,lo,hi`.
    #[arg(long = "box", visible_alias = "region", num_args = 1..=2)]
    pub region: Option<Vec<String>>,
    /// Grid points per axis.
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long)]
    pub max_residual: Option<f64>,
    #[arg(long)]
    pub min_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneratePoint {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyResult {
    pub family: String,
    pub points: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Vec<f64>,
    pub worst_value: Vec<f64>,
    pub degenerate_points: Vec<DegeneratePoint>,
}

fn apply_operator(
    cfg: &VerifyConfig,
    h: &crate::hamiltonians::Hamiltonian,
    jet: &Jet,
) -> crate::error::Result<(Vec<f64>, Option<String>)> {
    let t = cfg.rank_tol;
    Ok(match cfg.operator {
        OperatorName::DeltaInf => {
            let r = inf_laplacian(jet, t)?;
            (r.value, r.degenerate)
        }
        OperatorName::TangentialInf => (tangential_inf_laplacian(jet), None),
        OperatorName::Aronsson => {
            let r = full_aronsson(h, jet, t)?;
            (r.value, r.degenerate)
        }
        OperatorName::TangentialAronsson => (tangential_aronsson(h, jet)?, None),
        OperatorName::GammaInf => {
            let r = gamma_inf(jet, t)?;
            (r.value, r.degenerate)
        }
        OperatorName::GammaAronsson => {
            let r = gamma_aronsson(h, jet, t)?;
            (r.value, r.degenerate)
        }
        OperatorName::DualInf => {
            let field = EigenFieldJet::from_jet_analytic(jet, cfg.gap_tol)?;
            (dual_inf_laplacian(jet, &field, cfg.gap_tol)?, None)
        }
        OperatorName::ContractedInf => (contracted_inf_system(jet, t)?, None),
    })
}

enum PointOutcome {
    Value(Vec<f64>, Option<String>),
    Skipped(String),
}

pub(super) fn verify(a: VerifyArgs) -> Result<Outcome<VerifyConfig, VerifyResult>, CliError> {
    let mut cfg: VerifyConfig = load_config(a.common.config.as_deref())?;
    if let Some(v) = a.family {
        cfg.family = v;
    }
    if let Some(v) = a.hamiltonian {
        cfg.hamiltonian = v;
    }
    if let Some(v) = a.operator {
        cfg.operator = v;
    }
    if let Some(v) = a.region {
        cfg.region = RegionSpec::from_words(&v)?;
    }
    if let Some(v) = a.res {
        cfg.res = v;
    }
    if a.max_residual.is_some() {
        cfg.max_residual = a.max_residual;
    }
    if a.min_residual.is_some() {
        cfg.min_residual = a.min_residual;
    }
    let family = cfg.family.build()?;
    let h = cfg
        .hamiltonian
        .build(family.target_dim(), family.source_dim())?;
    let region = cfg.region.resolve(&family)?;
    let pts = region_grid(&family, &region, cfg.res)?;
    let outcomes: Vec<PointOutcome> = pts
        .par_iter()
        .map(|x| -> Result<PointOutcome, LabError> {
            let jet = match family.jet(x) {
                Ok(j) => j,
                Err(LabError::NonSmoothPoint(_)) => {
                    return Ok(PointOutcome::Skipped("jet undefined".into()))
                }
                Err(e) => return Err(e),
            };
            match apply_operator(&cfg, &h, &jet) {
                Ok((v, d)) => Ok(PointOutcome::Value(v, d)),
                Err(e @ LabError::EigenvalueCoalescence { .. }) => {
                    Ok(PointOutcome::Skipped(e.to_string()))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut res = VerifyResult {
        family: family.name.clone(),
        points: 0,
        max_residual: 0.0,
        mean_residual: 0.0,
        worst_point: Vec::new(),
        worst_value: Vec::new(),
        degenerate_points: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut total = 0.0;
    for (x, o) in pts.iter().zip(outcomes) {
        match o {
            PointOutcome::Value(v, d) => {
                let r = norm(&v);
                res.points += 1;
                total += r;
                if r > res.max_residual || res.worst_point.is_empty() {
                    res.max_residual = r;
                    res.worst_point = x.clone();
                    res.worst_value = v.clone();
                }
                if let Some(reason) = d {
                    res.degenerate_points.push(DegeneratePoint {
                        point: x.clone(),
                        reason,
                    });
                }
                let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
                row.push(r.to_string());
                rows.push(row);
            }
            PointOutcome::Skipped(reason) => res.degenerate_points.push(DegeneratePoint {
                point: x.clone(),
                reason,
            }),
        }
    }
    if res.points == 0 {
        return Err(CliError::Config("no grid point inside the region".into()));
    }
    res.mean_residual = total / res.points as f64;
    let mut header: Vec<String> = (1..=family.source_dim())
        .map(|i| format!("x_{i}"))
        .collect();
    header.push("residual".into());
    let csv = csv_string(&header, rows)?;
    let mut assertions = Vec::new();
    if let Some(m) = cfg.max_residual {
        assertions.push(Assertion::new(
            "max_residual",
            res.max_residual <= m,
            format!("{:.3e} <= {m:.1e}", res.max_residual),
        ));
    }
    if let Some(m) = cfg.min_residual {
        assertions.push(Assertion::new(
            "min_residual",
            res.max_residual > m,
            format!("{:.3e} > {m:.1e}", res.max_residual),
        ));
    }
    let summary = vec![format!(
        "{} on {}: {} points, max residual {:.3e} at {:?}, mean {:.3e}, {} degenerate",
        serde_json::to_string(&cfg.operator).unwrap_or_default(),
        family.name,
        res.points,
        res.max_residual,
        res.worst_point,
        res.mean_residual,
        res.degenerate_points.len()
    )];
    Ok(Outcome {
        command: "verify",
        config: cfg,
        result: res,
        assertions,
        csv,
        summary,
    })
}

// ---------------------------------------------------------------- flow

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    /// `Phi' = Du(Phi)^T xi`.
    Tangential,
    /// `Phi' = H_P(Du(Phi))^T h` with `h` the horizontal part of a constant `e`.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub family: FamilySpec,
    pub kind: FlowKind,
    pub hamiltonian: HamiltonianSpec,
    pub x0: Vec<f64>,
    pub xi: Vec<f64>,
    pub e: Vec<f64>,
    pub t: f64,
    pub step: f64,
    pub rank_tol: f64,
    /// Bound on the drift of `|Du(Phi)|` (tangential) or `H(Du(Phi))`
    /// (horizontal); `null` disables the check.
    pub max_drift: Option<f64>,
    /// Lower bound on the increments of `xi^T u(Phi)` (tangential flow).
    pub min_increment: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::ExpDiff,
            kind: FlowKind::Tangential,
            hamiltonian: HamiltonianSpec::default(),
            x0: vec![0.2, 0.1],
            xi: vec![1.0, 0.0],
            e: vec![1.0, 0.0],
            t: 1.0,
            step: 1e-3,
            rank_tol: DEFAULT_RANK_TOL,
            max_drift: Some(1e-6),
            min_increment: -1e-9,
        }
    }
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<FamilySpec>,
    #[arg(long, value_enum)]
    pub kind: Option<FlowKind>,
    #[arg(long, value_parser = parse_hamiltonian)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub x0: Option<Floats>,
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub xi: Option<Floats>,
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub e: Option<Floats>,
    /// Final time.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_drift: Option<f64>,
    /// Skip the monitor drift check.
    #[arg(long)]
    pub no_drift_check: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub min_increment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub family: String,
    pub termination: Termination,
    pub steps: usize,
    pub final_point: Vec<f64>,
    pub drift: BTreeMap<String, f64>,
    pub min_increment: BTreeMap<String, f64>,
    pub identities: Option<IdentityReport>,
}

pub(super) fn flow(a: FlowArgs) -> Result<Outcome<FlowConfig, FlowResult>, CliError> {
    let mut cfg: FlowConfig = load_config(a.common.config.as_deref())?;
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    set!(family, kind, hamiltonian, t, step, min_increment);
    for (dst, src) in [(&mut cfg.x0, a.x0), (&mut cfg.xi, a.xi), (&mut cfg.e, a.e)] {
        if let Some(Floats(v)) = src {
            *dst = v;
        }
    }
    if a.max_drift.is_some() {
        cfg.max_drift = a.max_drift;
    }
    if a.no_drift_check {
        cfg.max_drift = None;
    }
    let family = cfg.family.build()?;
    let (trace, watched) = match cfg.kind {
        FlowKind::Tangential => (
            tangential_flow(&family, &cfg.x0, &cfg.xi, cfg.t, cfg.step)?,
            "grad_norm",
        ),
        FlowKind::Horizontal => {
            let h = cfg
                .hamiltonian
                .build(family.target_dim(), family.source_dim())?;
            let e = cfg.e.clone();
            (
                horizontal_flow(
                    &h,
                    &family,
                    &cfg.x0,
                    move |_| e.clone(),
                    cfg.t,
                    cfg.step,
                    cfg.rank_tol,
                )?,
                "hamiltonian",
            )
        }
    };
    let drift: BTreeMap<String, f64> = trace
        .monitors
        .keys()
        .map(|k| (k.clone(), trace.drift(k)))
        .collect();
    let min_increment: BTreeMap<String, f64> = trace
        .monitors
        .keys()
        .map(|k| (k.clone(), trace.min_increment(k)))
        .collect();
    let identities = match cfg.kind {
        FlowKind::Tangential if trace.points.len() >= 5 && family.jet_order() >= 2 => {
            Some(trajectory_identities(&trace, &family, &cfg.xi, &cfg.xi)?)
        }
        _ => None,
    };
    let mut assertions = Vec::new();
    if let Some(m) = cfg.max_drift {
        let d = trace.drift(watched);
        assertions.push(Assertion::new(
            &format!("{watched}_drift"),
            d <= m,
            format!("{d:.3e} <= {m:.1e}"),
        ));
    }
    if cfg.kind == FlowKind::Tangential {
        let inc = trace.min_increment("xi_u");
        assertions.push(Assertion::new(
            "xi_u_monotone",
            inc >= cfg.min_increment,
            format!("min increment {inc:.3e} >= {:.1e}", cfg.min_increment),
        ));
    }
    let res = FlowResult {
        family: family.name.clone(),
        termination: trace.termination,
        steps: trace.times.len().saturating_sub(1),
        final_point: trace.points.last().cloned().unwrap_or_default(),
        drift,
        min_increment,
        identities,
    };
    let summary = vec![format!(
        "{:?} flow on {}: {} steps, termination {}, final point {:?}",
        cfg.kind,
        family.name,
        res.steps,
        serde_json::to_string(&res.termination).unwrap_or_default(),
        res.final_point
    )];
    Ok(Outcome {
        command: "flow",
        csv: trace.to_csv()?,
        config: cfg,
        result: res,
        assertions,
        summary,
    })
}

// ---------------------------------------------------------------- relax

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    pub boundary: FamilySpec,
    pub hamiltonian: HamiltonianSpec,
    pub p_list: Vec<f64>,
    /// Must resolve to an axis-aligned box.
    pub region: RegionSpec,
    pub res: usize,
    pub solver: SolverParams,
    /// Passes when the fitted slope lies in `[lo, hi]`.
    pub slope_range: Option<[f64; 2]>,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            boundary: FamilySpec::Saddle,
            hamiltonian: HamiltonianSpec::default(),
            p_list: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            region: RegionSpec::DomainInset { inset: 0.0 },
            res: 21,
            solver: SolverParams::default(),
            slope_range: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Family providing the Dirichlet data.
    #[arg(long, value_parser = parse_family)]
    pub boundary: Option<FamilySpec>,
    #[arg(long, value_parser = parse_hamiltonian)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[arg(long, value_parser = parse_floats)]
    pub p_list: Option<Floats>,
    #[arg(long = "box", visible_alias = "region", num_args = 1..=2)]
    pub region: Option<Vec<String>>,
    /// Nodes per axis.
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// `lo,hi` bounds for the fitted slope.
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub slope_range: Option<Floats>,
}

pub(super) fn relax(a: RelaxArgs) -> Result<Outcome<RelaxConfig, SweepReport>, CliError> {
    let mut cfg: RelaxConfig = load_config(a.common.config.as_deref())?;
    if let Some(v) = a.boundary {
        cfg.boundary = v;
    }
    if let Some(v) = a.hamiltonian {
        cfg.hamiltonian = v;
    }
    if let Some(Floats(v)) = a.p_list {
        cfg.p_list = v;
    }
    if let Some(v) = a.region {
        cfg.region = RegionSpec::from_words(&v)?;
    }
    if let Some(v) = a.res {
        cfg.res = v;
    }
    if let Some(v) = a.max_iterations {
        cfg.solver.max_iterations = v;
    }
    if let Some(v) = a.tolerance {
        cfg.solver.tolerance = v;
    }
    if let Some(Floats(v)) = a.slope_range {
        let [lo, hi] = v[..] else {
            return Err(CliError::Config("--slope-range takes two values".into()));
        };
        cfg.slope_range = Some([lo, hi]);
    }
    let family = cfg.boundary.build()?;
    let h = cfg
        .hamiltonian
        .build(family.target_dim(), family.source_dim())?;
    let Domain::Box { lo, hi } = cfg.region.resolve(&family)? else {
        return Err(CliError::Config("relax needs a box region".into()));
    };
    if lo.len() != 2 {
        return Err(CliError::Config("relax needs a planar family".into()));
    }
    let (lo, hi) = ([lo[0], lo[1]], [hi[0], hi[1]]);
    let res = [cfg.res, cfg.res];
    let rep = p_sweep_diagnostics(&h, &family, lo, hi, res, &cfg.p_list, &cfg.solver)?;
    // the final field is recomputed from the last solve's warm start chain
    let grid = last_field(&h, &family, lo, hi, res, &cfg)?;
    let mut assertions = vec![Assertion::new(
        "all_converged",
        rep.rows.iter().all(|r| r.converged),
        format!(
            "{}/{} solves converged",
            rep.rows.iter().filter(|r| r.converged).count(),
            rep.rows.len()
        ),
    )];
    if let Some([s0, s1]) = cfg.slope_range {
        let ok = rep.slope.is_some_and(|s| (s0..=s1).contains(&s));
        assertions.push(Assertion::new(
            "slope_range",
            ok,
            format!("slope {:?} in [{s0}, {s1}]", rep.slope),
        ));
    }
    let mut summary = vec![format!(
        "{:>6} {:>6} {:>12} {:>12} {:>12}",
        "p", "iters", "med|RHS|", "med|LHS|", "med|gap|"
    )];
    for r in &rep.rows {
        summary.push(format!(
            "{:>6} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.p, r.iterations, r.median_rhs, r.median_lhs, r.median_gap
        ));
    }
    summary.push(format!(
        "fitted slope of log med|RHS| vs log(p - 1): {:?}",
        rep.slope
    ));
    Ok(Outcome {
        command: "relax",
        csv: grid.to_csv()?,
        config: cfg,
        result: rep,
        assertions,
        summary,
    })
}

fn last_field(
    h: &crate::hamiltonians::Hamiltonian,
    family: &MapFamily,
    lo: [f64; 2],
    hi: [f64; 2],
    res: [usize; 2],
    cfg: &RelaxConfig,
) -> Result<GridField, CliError> {
    let mut grid = GridField::with_boundary_from(family, lo, hi, res)?;
    for &p in &cfg.p_list {
        let (g, _) = crate::relaxation::p_descent_solve(&crate::relaxation::DirichletProblem {
            h: h.clone(),
            p,
            grid,
            params: cfg.solver.clone(),
        })?;
        grid = g;
    }
    Ok(grid)
}

// ---------------------------------------------------------------- interface

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterfaceConfig {
    pub family: FamilySpec,
    pub tol: f64,
    pub res: usize,
    pub region: RegionSpec,
    /// Passes when every confirmed refined point lies within this distance of `{x = y}`.
    pub near_diagonal: Option<f64>,
}

impl Default for InterfaceConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::ExpDiff,
            tol: 1e-3,
            res: 201,
            region: RegionSpec::DomainInset { inset: 0.0 },
            near_diagonal: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct InterfaceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<FamilySpec>,
    /// Colinearity tolerance `||f'.g'| - 1| <= tol`.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long = "box", visible_alias = "region", num_args = 1..=2)]
    pub region: Option<Vec<String>>,
    #[arg(long)]
    pub near_diagonal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceResult {
    pub family: String,
    pub count: usize,
    pub confirmed: usize,
    pub rank_counts: BTreeMap<usize, usize>,
    pub max_refined_defect: f64,
    pub max_diagonal_distance: Option<f64>,
    pub max_grid_diagonal_distance: f64,
    pub locus: Vec<InterfacePoint>,
}

pub(super) fn interface(
    a: InterfaceArgs,
) -> Result<Outcome<InterfaceConfig, InterfaceResult>, CliError> {
    let mut cfg: InterfaceConfig = load_config(a.common.config.as_deref())?;
    if let Some(v) = a.family {
        cfg.family = v;
    }
    if let Some(v) = a.tol {
        cfg.tol = v;
    }
    if let Some(v) = a.res {
        cfg.res = v;
    }
    if let Some(v) = a.region {
        cfg.region = RegionSpec::from_words(&v)?;
    }
    if a.near_diagonal.is_some() {
        cfg.near_diagonal = a.near_diagonal;
    }
    let family = cfg.family.build()?;
    let region = cfg.region.resolve(&family)?;
    let (lo, hi) = region.bounds();
    if lo.len() != 2 {
        return Err(CliError::Config(
            "interface needs a planar separable family".into(),
        ));
    }
    let grid = GridSpec {
        lo: [lo[0], lo[1]],
        hi: [hi[0], hi[1]],
        counts: [cfg.res, cfg.res],
    };
    let locus: Vec<InterfacePoint> = interface_locus(&family, &grid, cfg.tol)?
        .into_iter()
        .filter(|p| region.margin(&p.point) >= -1e-12)
        .collect();
    let mut rank_counts = BTreeMap::new();
    for p in &locus {
        *rank_counts.entry(p.rank).or_insert(0) += 1;
    }
    let diag = |x: &[f64]| (x[0] - x[1]).abs() / 2f64.sqrt();
    // grid hits sit up to acos(1 - tol) off the locus; the assertion measures
    // the refined points
    let max_diagonal_distance = cfg.near_diagonal.map(|_| {
        locus
            .iter()
            .filter(|p| p.confirmed)
            .map(|p| diag(&p.refined))
            .fold(0.0, f64::max)
    });
    let max_grid_diagonal_distance = locus.iter().map(|p| diag(&p.point)).fold(0.0, f64::max);
    let mut assertions = Vec::new();
    let confirmed = locus.iter().filter(|p| p.confirmed).count();
    if let (Some(m), Some(d)) = (cfg.near_diagonal, max_diagonal_distance) {
        assertions.push(Assertion::new(
            "near_diagonal",
            confirmed > 0 && d <= m,
            format!("{confirmed} confirmed points, max distance {d:.3e} <= {m:.1e}"),
        ));
    }
    let header: Vec<String> = [
        "x",
        "y",
        "defect",
        "rank",
        "refined_x",
        "refined_y",
        "refined_defect",
        "confirmed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let csv = csv_string(
        &header,
        locus.iter().map(|p| {
            vec![
                p.point[0].to_string(),
                p.point[1].to_string(),
                p.defect.to_string(),
                p.rank.to_string(),
                p.refined[0].to_string(),
                p.refined[1].to_string(),
                p.refined_defect.to_string(),
                p.confirmed.to_string(),
            ]
        }),
    )?;
    let res = InterfaceResult {
        family: family.name.clone(),
        count: locus.len(),
        confirmed,
        rank_counts,
        max_refined_defect: locus.iter().map(|p| p.refined_defect).fold(0.0, f64::max),
        max_diagonal_distance,
        max_grid_diagonal_distance,
        locus,
    };
    let summary = vec![format!(
        "interface of {}: {} points ({} confirmed), ranks {:?}",
        family.name, res.count, res.confirmed, res.rank_counts
    )];
    Ok(Outcome {
        command: "interface",
        config: cfg,
        result: res,
        assertions,
        csv,
        summary,
    })
}

// ---------------------------------------------------------------- probe

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Lipschitz estimate against sampled suprema of `|Du|_op` and `|Du|`.
    Lip,
    /// `E_inf` on a ball before and after a quadratic bump.
    Am,
    /// `E_inf` of the family against a competitor map.
    Competitor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MarginSign {
    Nonnegative,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    pub family: FamilySpec,
    pub competitor: Option<FamilySpec>,
    pub hamiltonian: HamiltonianSpec,
    pub region: RegionSpec,
    pub seed: u64,
    pub pairs: usize,
    pub samples: usize,
    pub x: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub xi: Vec<f64>,
    /// Passes when `|sup |Du|_op - Lip| / Lip` is at most this.
    pub max_coincidence_gap: Option<f64>,
    /// Passes when `sup |Du| / Lip - 1` is at least this.
    pub min_euclidean_excess: Option<f64>,
    pub expect_margin: Option<MarginSign>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            kind: ProbeKind::Lip,
            family: FamilySpec::ExpDiff,
            competitor: None,
            hamiltonian: HamiltonianSpec::default(),
            region: RegionSpec::default(),
            seed: 0,
            pairs: 100_000,
            samples: 100_000,
            x: vec![0.0, 0.0],
            eps: 0.5,
            delta: 0.1,
            xi: vec![1.0, 0.0],
            max_coincidence_gap: None,
            min_euclidean_excess: None,
            expect_margin: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub kind: Option<ProbeKind>,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<FamilySpec>,
    #[arg(long, value_parser = parse_family)]
    pub competitor: Option<FamilySpec>,
    #[arg(long, value_parser = parse_hamiltonian)]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[arg(long = "box", visible_alias = "region", num_args = 1..=2)]
    pub region: Option<Vec<String>>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub x: Option<Floats>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_parser = parse_floats, allow_hyphen_values = true)]
    pub xi: Option<Floats>,
    #[arg(long)]
    pub max_coincidence_gap: Option<f64>,
    #[arg(long)]
    pub min_euclidean_excess: Option<f64>,
    #[arg(long, value_enum)]
    pub expect_margin: Option<MarginSign>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipReport {
    pub lip: LipEstimate,
    pub sup_operator_norm: f64,
    pub sup_euclidean_norm: f64,
    /// `|sup |Du|_op - Lip| / Lip`.
    pub coincidence_gap: f64,
    /// `sup |Du| / Lip - 1`.
    pub euclidean_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub family: String,
    pub lip: Option<LipReport>,
    pub energies: Option<AmProbe>,
}

pub(super) fn probe(a: ProbeArgs) -> Result<Outcome<ProbeConfig, ProbeResult>, CliError> {
    let mut cfg: ProbeConfig = load_config(a.common.config.as_deref())?;
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    set!(kind, family, hamiltonian, pairs, samples, eps, delta);
    for (dst, src) in [(&mut cfg.x, a.x), (&mut cfg.xi, a.xi)] {
        if let Some(Floats(v)) = src {
            *dst = v;
        }
    }
    if a.competitor.is_some() {
        cfg.competitor = a.competitor;
    }
    if let Some(v) = a.region {
        cfg.region = RegionSpec::from_words(&v)?;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    if a.max_coincidence_gap.is_some() {
        cfg.max_coincidence_gap = a.max_coincidence_gap;
    }
    if a.min_euclidean_excess.is_some() {
        cfg.min_euclidean_excess = a.min_euclidean_excess;
    }
    if a.expect_margin.is_some() {
        cfg.expect_margin = a.expect_margin;
    }
    let family = cfg.family.build()?;
    let h = cfg
        .hamiltonian
        .build(family.target_dim(), family.source_dim())?;
    let mut res = ProbeResult {
        family: family.name.clone(),
        lip: None,
        energies: None,
    };
    let mut assertions = Vec::new();
    let mut summary = Vec::new();
    let csv;
    match cfg.kind {
        ProbeKind::Lip => {
            let region = cfg.region.resolve(&family)?;
            let lip = lip_estimate(&family, &region, cfg.pairs, cfg.seed)?;
            let op = sup_operator_norm(&family, &region, cfg.samples, cfg.seed)?;
            let euc = sup_over_region(&family, &region, cfg.samples, cfg.seed, |g| {
                Ok(g.frobenius_norm())
            })?;
            let r = LipReport {
                coincidence_gap: (op - lip.value).abs() / lip.value,
                euclidean_excess: euc / lip.value - 1.0,
                lip,
                sup_operator_norm: op,
                sup_euclidean_norm: euc,
            };
            if let Some(m) = cfg.max_coincidence_gap {
                assertions.push(Assertion::new(
                    "coincidence_gap",
                    r.coincidence_gap <= m,
                    format!("{:.3e} <= {m}", r.coincidence_gap),
                ));
            }
            if let Some(m) = cfg.min_euclidean_excess {
                assertions.push(Assertion::new(
                    "euclidean_excess",
                    r.euclidean_excess >= m,
                    format!("{:.3} >= {m}", r.euclidean_excess),
                ));
            }
            summary.push(format!(
                "Lip ~ {:.6} ({} pairs), sup |Du|_op = {:.6}, sup |Du| = {:.6}",
                r.lip.value, r.lip.pairs_used, r.sup_operator_norm, r.sup_euclidean_norm
            ));
            csv = key_value_csv(&[
                ("lip", r.lip.value),
                ("sup_operator_norm", r.sup_operator_norm),
                ("sup_euclidean_norm", r.sup_euclidean_norm),
                ("coincidence_gap", r.coincidence_gap),
                ("euclidean_excess", r.euclidean_excess),
            ])?;
            res.lip = Some(r);
        }
        ProbeKind::Am | ProbeKind::Competitor => {
            let p = if cfg.kind == ProbeKind::Am {
                am_perturbation_probe(
                    &family,
                    &h,
                    &cfg.x,
                    cfg.eps,
                    cfg.delta,
                    &cfg.xi,
                    cfg.samples,
                )?
            } else {
                let Some(v) = &cfg.competitor else {
                    return Err(CliError::Config(
                        "competitor probe needs --competitor".into(),
                    ));
                };
                let region = cfg.region.resolve(&family)?;
                competitor_probe(&family, &v.build()?, &h, &region, cfg.samples)?
            };
            if let Some(sign) = cfg.expect_margin {
                let ok = match sign {
                    MarginSign::Nonnegative => p.margin >= 0.0,
                    MarginSign::Negative => p.margin < 0.0,
                };
                assertions.push(Assertion::new(
                    "margin_sign",
                    ok,
                    format!("margin {:.3e}", p.margin),
                ));
            }
            summary.push(format!(
                "E_u = {:.6}, E_w = {:.6}, margin = {:.3e}",
                p.e_u, p.e_w, p.margin
            ));
            csv = key_value_csv(&[("e_u", p.e_u), ("e_w", p.e_w), ("margin", p.margin)])?;
            res.energies = Some(p);
        }
    }
    Ok(Outcome {
        command: "probe",
        config: cfg,
        result: res,
        assertions,
        csv,
        summary,
    })
}

// ---------------------------------------------------------------- identities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub samples: usize,
    pub seed: u64,
    /// Bound for the Euclidean specialisation and contraction identities.
    pub exact_tol: f64,
    /// Bound for the dual projection identity (finite-difference `De`).
    pub dual_tol: f64,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0,
            exact_tol: 1e-12,
            dual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Args)]
pub struct IdentitiesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub samples: Option<usize>,
}

pub(super) fn identities(
    a: IdentitiesArgs,
) -> Result<Outcome<IdentitiesConfig, IdentitySuite>, CliError> {
    let mut cfg: IdentitiesConfig = load_config(a.common.config.as_deref())?;
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    let r = identity_suite(cfg.samples, cfg.seed)?;
    let t = cfg.exact_tol;
    let checks: [(&str, f64, f64); 8] = [
        ("tangential_specialisation", r.tangential_specialisation, t),
        ("normal_specialisation", r.normal_specialisation, t),
        ("contracted_inf", r.contracted_inf, t),
        ("contracted_aronsson", r.contracted_aronsson, t),
        ("scalar_normal", r.scalar_normal, 0.0),
        ("gamma_on_curves", r.gamma_on_curves, t),
        ("dual_projection", r.dual_projection, cfg.dual_tol),
        ("dual_sign_flip", r.dual_sign_flip, 0.0),
    ];
    let assertions = checks
        .iter()
        .map(|(n, v, tol)| Assertion::new(n, v <= tol, format!("{v:.3e} <= {tol:.1e}")))
        .collect();
    let csv = key_value_csv(&checks.iter().map(|(n, v, _)| (*n, *v)).collect::<Vec<_>>())?;
    let summary = vec![format!("{} random jets (seed {})", cfg.samples, cfg.seed)];
    Ok(Outcome {
        command: "identities",
        config: cfg,
        result: r,
        assertions,
        csv,
        summary,
    })
}
