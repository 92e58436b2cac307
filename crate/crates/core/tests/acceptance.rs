//! Acceptance criteria 1-13, one line each. Runs without the libtest harness
//! so the lines are printed whether or not a criterion fails.

use aronsson_lab::error::{LabError, Result};
use aronsson_lab::flows::{
    horizontal_flow, phase_split, tangential_flow, trajectory_identities,
    vertical_field_derivative, vertical_system_residual, Termination,
};
use aronsson_lab::hamiltonians::{euclidean_hamiltonian, segment_flat_hamiltonian, Hamiltonian};
use aronsson_lab::linalg::{svd_projections, DEFAULT_RANK_TOL};
use aronsson_lab::operators::{
    contracted_aronsson_system, contracted_inf_system, identity_suite, inf_laplacian,
    tangential_inf_laplacian, ContractedData,
};
use aronsson_lab::relaxation::{
    competitor_probe, lip_estimate, p_descent_solve, p_sweep_diagnostics, residual_medians,
    sup_operator_norm, sup_over_region, DirichletProblem, GridField, SolverParams,
};
use aronsson_lab::solutions::{
    circle_curve_map, constant_map, embedded_aronsson_map, exp_diff_map, exp_sum_map, fd_jet,
    k_integral_map, rank_one_map, registry, saddle_map, scalar_aronsson_map, Domain, KProfile,
    MapFamily,
};
use aronsson_lab::tensor::{add, dot, norm, Jet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

type Check = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

/// 101 x 101 points of `{|x + y|, |x - y| <= pi - 0.1}`, laid out along the
/// diagonals so every point is inside.
fn rhombus_points() -> Vec<[f64; 2]> {
    let r = PI - 0.1;
    let m = 101;
    let mut out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in 0..m {
            let s = -r + 2.0 * r * a as f64 / (m - 1) as f64;
            let t = -r + 2.0 * r * b as f64 / (m - 1) as f64;
            out.push([0.5 * (s + t), 0.5 * (s - t)]);
        }
    }
    out
}

fn delta_inf(f: &MapFamily, x: &[f64]) -> Result<Vec<f64>> {
    Ok(inf_laplacian(&f.jet(x)?, DEFAULT_RANK_TOL)?.value)
}

fn c1_exp_diff_harmonic() -> Check {
    let f = exp_diff_map();
    let mut worst: f64 = 0.0;
    for x in rhombus_points() {
        worst = worst.max(norm(&delta_inf(&f, &x)?));
    }
    Ok((
        worst <= 1e-10,
        format!("max |Delta_inf u| = {worst:.3e} <= 1e-10 on 101^2 points"),
    ))
}

fn c2_failure_point() -> Check {
    let f = exp_diff_map();
    let v = delta_inf(&f, &[0.0, PI])?;
    let err = norm(&[v[0] + 4.0, v[1]]);
    Ok((
        err <= 1e-9,
        format!(
            "Delta_inf u(0, pi) = ({:.12}, {:.3e}), error {err:.3e} <= 1e-9",
            v[0], v[1]
        ),
    ))
}

fn c3_sum_map() -> Check {
    let f = exp_sum_map();
    let vals: Vec<([f64; 2], f64)> = rhombus_points()
        .into_iter()
        .map(|x| Ok((x, norm(&delta_inf(&f, &x)?))))
        .collect::<Result<_>>()?;
    let max = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    // points carrying residual above 0.1 must sit within 0.1 of the diagonal
    let diag = |x: &[f64; 2]| (x[0] - x[1]).abs() / SQRT_2;
    let large: Vec<&([f64; 2], f64)> = vals.iter().filter(|v| v.1 > 0.1).collect();
    let far = large.iter().map(|v| diag(&v.0)).fold(0.0, f64::max);
    Ok((
        max > 0.1 && far <= 0.1,
        format!(
            "max {max:.3}; {} points above 0.1, farthest {far:.3e} from x = y (<= 0.1)",
            large.len()
        ),
    ))
}

fn c4_aronsson_scalar() -> Check {
    let minus = scalar_aronsson_map([1.0, -1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 1000 {
        let x = minus.domain.sample(&mut rng, 0.0);
        if x[0].abs() < 0.05 || x[1].abs() < 0.05 {
            continue;
        }
        worst = worst.max(norm(&delta_inf(&minus, &x)?));
        count += 1;
    }
    let plus = norm(&delta_inf(&scalar_aronsson_map([1.0, 1.0]), &[1.0, 1.0])?);
    Ok((
        worst <= 1e-8 && plus > 1e-3,
        format!("minus sign max {worst:.3e} <= 1e-8; plus sign at (1, 1) {plus:.4} > 1e-3"),
    ))
}

fn c5_curve_dichotomy() -> Check {
    let c = circle_curve_map();
    let (mut tan, mut full_err): (f64, f64) = (0.0, 0.0);
    for k in 1..1000 {
        let t = 2.0 * PI * k as f64 / 1000.0;
        let j = c.jet(&[t])?;
        tan = tan.max(norm(&tangential_inf_laplacian(&j)));
        full_err = full_err.max((norm(&inf_laplacian(&j, DEFAULT_RANK_TOL)?.value) - 1.0).abs());
    }
    let h = Hamiltonian::euclidean_weighted(2, 1, 1.0);
    let region = Domain::Box {
        lo: vec![0.0],
        hi: vec![2.0 * PI],
    };
    let e = competitor_probe(&c, &constant_map(vec![1.0, 0.0], 1), &h, &region, 1000)?;
    let ok = tan <= 1e-12 && full_err <= 1e-12 && (e.e_u - 1.0).abs() <= 1e-12 && e.e_w == 0.0;
    Ok((
        ok,
        format!(
            "|Delta_T| max {tan:.2e}; ||Delta_inf| - 1| max {full_err:.2e}; E(u) = {:.15}, E(v) = {}",
            e.e_u, e.e_w
        ),
    ))
}

fn c6_flow_invariants() -> Check {
    let f = exp_diff_map();
    let xi = [1.0, 0.0];
    let x0 = [0.2, 0.1];
    let tr = tangential_flow(&f, &x0, &xi, 1.0, 1e-3)?;
    let speed = tr
        .monitor("grad_norm")
        .iter()
        .map(|v| (v - SQRT_2).abs())
        .fold(0.0, f64::max);
    let inc = tr.min_increment("xi_u");
    let a = trajectory_identities(&tr, &f, &xi, &xi)?
        .second_derivative
        .unwrap_or(f64::NAN);
    let tr2 = tangential_flow(&f, &x0, &xi, 1.0, 5e-4)?;
    let b = trajectory_identities(&tr2, &f, &xi, &xi)?
        .second_derivative
        .unwrap_or(f64::NAN);
    let done = tr.termination == Termination::Completed;
    Ok((
        done && speed <= 1e-6 && inc >= -1e-9 && a <= 1e-4 && a / b >= 3.5,
        format!(
            "||Du| - sqrt 2| {speed:.2e} <= 1e-6; min increment {inc:.3e} >= -1e-9; curvature {a:.3e} <= 1e-4, halving ratio {:.4} >= 3.5",
            a / b
        ),
    ))
}

fn c7_identity_suite() -> Check {
    let s = identity_suite(1000, 7)?;
    // Euclidean H = 1/2 |P|^2: equal tangential parts and half the normal part
    let exact = [
        s.tangential_specialisation,
        s.normal_specialisation,
        s.contracted_inf,
        s.contracted_aronsson,
        s.gamma_on_curves,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let ok = exact <= 1e-12
        && s.scalar_normal == 0.0
        && s.dual_projection <= 1e-8
        && s.dual_sign_flip == 0.0;
    Ok((
        ok,
        format!(
            "specialisation/contracted/Gamma max {exact:.2e} <= 1e-12; N = 1 normal {:.1e}; dual projection {:.2e} <= 1e-8; sign flip {:.1e}",
            s.scalar_normal, s.dual_projection, s.dual_sign_flip
        ),
    ))
}

fn jet_errors(an: &Jet, fd: &Jet) -> (f64, f64) {
    (
        an.grad.sub(&fd.grad).max_abs(),
        an.hess.sub(&fd.hess).max_abs(),
    )
}

/// Every registered family, 100 random points at least `4h` from the
/// boundary and from kinks, with `h = min(1e-2, length_scale / 2)`. Families that are polynomial of degree <= 2
/// between kinks difference exactly, so their error must stay at rounding
/// level instead of showing an order ratio. Hessians are only compared where
/// the family certifies them.
fn c8_jet_oracles() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, f) in registry().iter().enumerate() {
        let h = (0.5 * f.length_scale()).min(1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(800 + k as u64);
        let (mut g1, mut g2, mut h1, mut h2): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        let mut taken = 0;
        while taken < 100 {
            let x = f.domain.sample(&mut rng, 4.0 * h);
            if f.smooth_distance(&x) < 4.0 * h {
                continue;
            }
            let an = f.jet(&x)?;
            let (a1, b1) = jet_errors(&an, &fd_jet(f, &x, h)?);
            let (a2, b2) = jet_errors(&an, &fd_jet(f, &x, 0.5 * h)?);
            g1 = g1.max(a1);
            g2 = g2.max(a2);
            h1 = h1.max(b1);
            h2 = h2.max(b2);
            taken += 1;
        }
        if f.locally_quadratic() {
            let fine = g1
                .max(g2)
                .max(if f.jet_order() == 2 { h1.max(h2) } else { 0.0 });
            let pass = fine <= 1e-8;
            ok &= pass;
            if !pass {
                lines.push(format!("{}: exact-differencing error {fine:.2e}", f.name));
            }
            continue;
        }
        let mut ratios = vec![g1 / g2];
        if f.jet_order() == 2 {
            ratios.push(h1 / h2);
        }
        for r in ratios {
            rmin = rmin.min(r);
            rmax = rmax.max(r);
            if !(3.6..=4.4).contains(&r) {
                ok = false;
                lines.push(format!("{}: ratio {r:.3}", f.name));
            }
        }
    }
    let mut detail = format!("order ratios in [{rmin:.3}, {rmax:.3}] (need [3.6, 4.4])");
    if !lines.is_empty() {
        detail.push_str(&format!("; failing: {}", lines.join(", ")));
    }
    Ok((ok, detail))
}

fn c9_p_sweep() -> Check {
    let t0 = Instant::now();
    let h = euclidean_hamiltonian(1, 2);
    let f = saddle_map();
    let params = SolverParams::default();
    let rep = p_sweep_diagnostics(
        &h,
        &f,
        [-1.0; 2],
        [1.0; 2],
        [21, 21],
        &[4.0, 8.0, 16.0, 32.0, 64.0],
        &params,
    )?;
    let slope = rep.slope.unwrap_or(f64::NAN);
    let converged = rep.rows.iter().all(|r| r.converged);
    let mut gaps = Vec::new();
    for res in [11, 21, 41] {
        let grid = GridField::with_boundary_from(&f, [-1.0; 2], [1.0; 2], [res, res])?;
        let (out, solve) = p_descent_solve(&DirichletProblem {
            h: h.clone(),
            p: 8.0,
            grid,
            params: params.clone(),
        })?;
        if !solve.converged {
            return Ok((false, format!("p = 8 solve at {res}^2 did not converge")));
        }
        gaps.push(residual_medians(&out, &h, 8.0)?.2);
    }
    let secs = t0.elapsed().as_secs_f64();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        converged && (slope + 1.0).abs() <= 0.3 && decreasing && secs <= 300.0,
        format!(
            "slope {slope:.3} in [-1.3, -0.7]; p = 8 median gap {:.3e} -> {:.3e} -> {:.3e}; {secs:.1} s",
            gaps[0], gaps[1], gaps[2]
        ),
    ))
}

fn c10_singular_families() -> Check {
    let k_map = k_integral_map(KProfile::smooth_sine(0.7))?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut rank_ok, mut norm_err, mut contracted): (bool, f64, f64) = (true, 0.0, 0.0);
    for _ in 0..10_000 {
        let x = k_map.domain.sample(&mut rng, 0.0);
        let j = k_map.jet(&x)?;
        rank_ok &= svd_projections(&j.grad, DEFAULT_RANK_TOL)?.rank == 2;
        norm_err = norm_err.max((j.grad.frobenius_dot(&j.grad) - 2.0).abs());
        contracted = contracted.max(norm(&contracted_inf_system(&j, DEFAULT_RANK_TOL)?));
    }
    let (eta, a, b) = ([0.6, 0.8], [1.0, 0.0], [0.0, 1.0]);
    let flat = segment_flat_hamiltonian(&eta, &a, &b)?;
    let rank_one = rank_one_map(&eta, &a, &b, KProfile::smooth_sine(0.7))?;
    let (mut hv, mut hp, mut c3): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut lambda_ok = true;
    for _ in 0..1000 {
        let x = rank_one.domain.sample(&mut rng, 0.0);
        let j = rank_one.jet(&x)?;
        hv = hv.max(flat.eval(&j.grad)?.abs());
        hp = hp.max(flat.grad(&j.grad)?.max_abs());
        let data = ContractedData::from_jet(&flat, &j)?;
        c3 = c3.max(norm(&contracted_aronsson_system(
            &flat,
            &j.grad,
            &data,
            DEFAULT_RANK_TOL,
        )?));
        let l = rank_one.combination_coefficient(&x).unwrap_or(f64::NAN);
        lambda_ok &= l > 0.0 && l < 1.0;
    }
    let ok = rank_ok
        && norm_err <= 1e-12
        && contracted <= 1e-10
        && hv <= 1e-12
        && hp <= 1e-12
        && c3 <= 1e-12
        && lambda_ok;
    Ok((
        ok,
        format!(
            "K-integral: rank 2 {rank_ok}, ||Du|^2 - 2| {norm_err:.1e}, contracted {contracted:.1e}; rank-one: H {hv:.1e}, H_P {hp:.1e}, system {c3:.1e}, lambda in (0,1) {lambda_ok}"
        ),
    ))
}

fn c11_phase_diagnostics() -> Check {
    let h = euclidean_hamiltonian(2, 2);
    let f = embedded_aronsson_map([1.0, -1.0]);
    let e2 = |_: &[f64]| vec![0.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut r1m, mut r2m, mut orth, mut recon): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut taken = 0;
    while taken < 1000 {
        let x = f.domain.sample(&mut rng, 0.01);
        if x[0].abs() < 0.05 || x[1].abs() < 0.05 {
            continue;
        }
        let g = f.grad(&x)?;
        let s = phase_split(&h, &g, &e2(&x), DEFAULT_RANK_TOL)?;
        let dv = vertical_field_derivative(&h, &f, &x, e2, 1e-5, DEFAULT_RANK_TOL)?;
        let (r1, r2) = vertical_system_residual(&h, &f.jet(&x)?, &s.v, &dv)?;
        r1m = r1m.max(norm(&r1));
        r2m = r2m.max(r2.abs());
        // the split for a generic direction, not just e_2
        let e: Vec<f64> = vec![(x[0] * 3.0).cos(), (x[1] * 5.0).sin()];
        let s = phase_split(&h, &g, &e, DEFAULT_RANK_TOL)?;
        orth = orth.max(dot(&s.h, &s.v).abs());
        recon = recon.max(norm(&aronsson_lab::tensor::sub(&add(&s.h, &s.v), &e)));
        taken += 1;
    }
    let tr = horizontal_flow(
        &h,
        &f,
        &[0.4, 0.9],
        |_| vec![1.0, 0.0],
        0.5,
        1e-3,
        DEFAULT_RANK_TOL,
    )?;
    let drift = tr.drift("hamiltonian");
    let done = tr.termination == Termination::Completed;
    let ok = r1m <= 1e-8 && r2m <= 1e-8 && done && drift <= 1e-5 && orth <= 1e-12 && recon <= 1e-12;
    Ok((
        ok,
        format!(
            "v^T Du {r1m:.1e}, Dv : H_P {r2m:.1e} (<= 1e-8); H drift {drift:.2e} <= 1e-5; split orthogonality {orth:.1e}, reconstruction {recon:.1e} (<= 1e-12)"
        ),
    ))
}

fn c12_norm_coincidence() -> Check {
    let f = exp_diff_map();
    let region = Domain::Box {
        lo: vec![0.7, 0.7 - PI / 2.0],
        hi: vec![0.85, 0.85 - PI / 2.0],
    };
    let lip = lip_estimate(&f, &region, 100_000, 0)?.value;
    let op = sup_operator_norm(&f, &region, 20_000, 0)?;
    let eu = sup_over_region(&f, &region, 20_000, 0, |g| Ok(g.frobenius_norm()))?;
    let gap = (op - lip).abs() / lip;
    let excess = eu / lip - 1.0;
    Ok((
        gap <= 0.02 && excess >= 0.3,
        format!("Lip {lip:.5}, sup |Du|_op {op:.5} (gap {:.3}% <= 2%), sup |Du| {eu:.5} (excess {:.1}% >= 30%)", 100.0 * gap, 100.0 * excess),
    ))
}

fn run_cli(dir: &std::path::Path, args: &[&str]) -> std::io::Result<std::process::Output> {
    std::process::Command::new(env!("CARGO_BIN_EXE_aronsson-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
}

fn c13_determinism() -> Check {
    let runs: [&[&str]; 6] = [
        &[
            "verify",
            "--family",
            "exp-diff",
            "--operator",
            "delta-inf",
            "--res",
            "41",
        ],
        &["flow", "--t", "0.2"],
        &["interface", "--res", "101"],
        &["probe", "--kind", "lip", "--pairs", "20000", "--seed", "3"],
        &["identities", "--samples", "200", "--seed", "5"],
        &["relax", "--p-list", "4,8", "--res", "11"],
    ];
    let a = tempfile::tempdir().map_err(LabError::from)?;
    let b = tempfile::tempdir().map_err(LabError::from)?;
    let mut files = 0;
    for args in runs {
        for dir in [a.path(), b.path()] {
            let out = run_cli(dir, args)?;
            if !out.status.success() {
                return Ok((false, format!("{args:?} exited with {}", out.status)));
            }
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    for name in &names {
        let x = std::fs::read(a.path().join(name))?;
        let y = std::fs::read(b.path().join(name))?;
        if x != y {
            return Ok((
                false,
                format!("{} differs between runs", name.to_string_lossy()),
            ));
        }
        files += 1;
    }
    Ok((
        files == 12,
        format!("{files} report files byte-identical across two runs"),
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("explicit infinity-harmonic map", c1_exp_diff_harmonic),
        ("failure point (0, pi)", c2_failure_point),
        ("sum map is not harmonic", c3_sum_map),
        ("scalar Aronsson pair", c4_aronsson_scalar),
        ("curve dichotomy", c5_curve_dichotomy),
        ("flow invariants", c6_flow_invariants),
        ("identity suite", c7_identity_suite),
        ("jet oracles", c8_jet_oracles),
        ("p-sweep", c9_p_sweep),
        ("singular families", c10_singular_families),
        ("phase diagnostics", c11_phase_diagnostics),
        ("norm coincidence", c12_norm_coincidence),
        ("determinism", c13_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
