//! Sampling estimators on explicit families: `Lip`, suprema of functions of
//! `Du`, the supremal energy, and the perturbation probe for absolute
//! minimality.

use crate::error::{LabError, Result};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::operator_norm;
use crate::solutions::{Domain, MapFamily};
use crate::tensor::{norm, sub, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    out
}

/// First `count` points of the Halton sequence in `[0, 1)^dim`, shifted
/// modulo 1 by a random offset drawn from `seed` (Cranley-Patterson).
pub fn halton(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} not supported");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

fn in_both(region: &Domain, family: &MapFamily, x: &[f64]) -> bool {
    region.margin(x) > 0.0 && family.domain.margin(x) > 0.0
}

fn region_points(
    family: &MapFamily,
    region: &Domain,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let n = family.source_dim();
    if region.dim() != n {
        return Err(LabError::DimensionMismatch(format!(
            "region has dimension {}, family '{}' has {n}",
            region.dim(),
            family.name
        )));
    }
    let (lo, hi) = region.bounds();
    Ok(halton(samples, n, seed)
        .into_iter()
        .map(|q| {
            q.iter()
                .zip(lo.iter().zip(&hi))
                .map(|(t, (a, b))| a + t * (b - a))
                .collect::<Vec<f64>>()
        })
        .filter(|x| in_both(region, family, x))
        .collect())
}

/// Largest value of `f(Du)` over quasi-random points of `region` (points
/// where `Du` does not exist are skipped).
pub fn sup_over_region(
    family: &MapFamily,
    region: &Domain,
    samples: usize,
    seed: u64,
    f: impl Fn(&Mat) -> Result<f64>,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for x in region_points(family, region, samples, seed)? {
        match family.grad(&x) {
            Ok(g) => best = best.max(f(&g)?),
            Err(LabError::NonSmoothPoint(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(LabError::InvalidParameter(
            "no sample fell inside region and domain".into(),
        ));
    }
    Ok(best)
}

/// Sampled `ess sup |Du|_op` over a region.
pub fn sup_operator_norm(
    family: &MapFamily,
    region: &Domain,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    sup_over_region(family, region, samples, seed, |g| Ok(operator_norm(g)))
}

/// Sampled `E_inf(u, region) = ess sup H(Du)`.
pub fn family_energy_inf(
    family: &MapFamily,
    h: &Hamiltonian,
    region: &Domain,
    samples: usize,
) -> Result<f64> {
    sup_over_region(family, region, samples, 0, |g| h.eval(g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipEstimate {
    /// Largest difference quotient seen (a lower bound for `Lip`).
    pub value: f64,
    pub pairs_requested: usize,
    /// Pairs with both points inside the region.
    pub pairs_used: usize,
}

/// `max |u(x) - u(y)| / |x - y|` over quasi-random pairs: `x` from a Halton
/// sequence, `y = x + r d` with log-uniform `r` and Halton direction `d`.
/// The estimate over a prefix of the pairs never exceeds the full one.
pub fn lip_estimate(
    family: &MapFamily,
    region: &Domain,
    pairs: usize,
    seed: u64,
) -> Result<LipEstimate> {
    let n = family.source_dim();
    if pairs < 2 {
        return Err(LabError::InvalidParameter(
            "need at least two sample pairs".into(),
        ));
    }
    if region.dim() != n || 2 * n + 1 > PRIMES.len() {
        return Err(LabError::DimensionMismatch(format!(
            "region/family dimension {n}"
        )));
    }
    let (lo, hi) = region.bounds();
    let diam = norm(&sub(&hi, &lo));
    let (rmin, rmax) = (1e-6 * diam, diam);
    let mut value: f64 = 0.0;
    let mut used = 0;
    for q in halton(pairs, 2 * n + 1, seed) {
        let x: Vec<f64> = (0..n).map(|d| lo[d] + q[d] * (hi[d] - lo[d])).collect();
        let r = rmin * (rmax / rmin).powf(q[n]);
        let dir: Vec<f64> = if n == 2 {
            let th = 2.0 * std::f64::consts::PI * q[n + 1];
            vec![th.cos(), th.sin()]
        } else {
            let raw: Vec<f64> = (0..n).map(|d| 2.0 * q[n + 1 + d] - 1.0).collect();
            let s = norm(&raw);
            if s == 0.0 {
                continue;
            }
            raw.iter().map(|v| v / s).collect()
        };
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + r * d).collect();
        if !in_both(region, family, &x) || !in_both(region, family, &y) {
            continue;
        }
        let du = sub(&family.value(&x)?, &family.value(&y)?);
        value = value.max(norm(&du) / norm(&sub(&x, &y)));
        used += 1;
    }
    Ok(LipEstimate {
        value,
        pairs_requested: pairs,
        pairs_used: used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmProbe {
    pub e_u: f64,
    pub e_w: f64,
    /// `e_w - e_u`; negative certifies that `u` is not absolutely minimising.
    pub margin: f64,
}

fn ball_points(x: &[f64], eps: f64, samples: usize) -> Result<Vec<Vec<f64>>> {
    match x.len() {
        1 => Ok((0..=samples)
            .map(|k| vec![x[0] - eps + 2.0 * eps * k as f64 / samples as f64])
            .collect()),
        2 => {
            let rings = ((samples as f64).sqrt().ceil() as usize).max(1);
            let per = (samples / rings).max(4);
            let mut out = vec![x.to_vec()];
            for k in 1..=rings {
                let r = eps * k as f64 / rings as f64;
                for m in 0..per {
                    let th = 2.0 * std::f64::consts::PI * m as f64 / per as f64;
                    out.push(vec![x[0] + r * th.cos(), x[1] + r * th.sin()]);
                }
            }
            Ok(out)
        }
        n => Err(LabError::DimensionMismatch(format!(
            "ball sampling supports n <= 2, got {n}"
        ))),
    }
}

/// Compares `E_inf` on the closed ball `B_eps(x)` of `u` and of
/// `w = u + g`, `g(z) = (delta/2)(eps^2 - |z - x|^2) xi`, which agrees with
/// `u` on the sphere. `Dw = Du - delta xi (z - x)^T`.
pub fn am_perturbation_probe(
    family: &MapFamily,
    h: &Hamiltonian,
    x: &[f64],
    eps: f64,
    delta: f64,
    xi: &[f64],
    samples: usize,
) -> Result<AmProbe> {
    if !(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "need eps, delta in (0, 1), got {eps}, {delta}"
        )));
    }
    if xi.len() != family.target_dim() || x.len() != family.source_dim() {
        return Err(LabError::DimensionMismatch(
            "probe point or direction".into(),
        ));
    }
    if (norm(xi) - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidParameter(
            "xi must be a unit vector".into(),
        ));
    }
    let margin = family.domain.margin(x);
    if margin <= eps {
        return Err(LabError::DomainMargin {
            point: x.to_vec(),
            margin,
        });
    }
    let (mut e_u, mut e_w) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for z in ball_points(x, eps, samples)? {
        let du = match family.grad(&z) {
            Ok(g) => g,
            Err(LabError::NonSmoothPoint(_)) => continue,
            Err(e) => return Err(e),
        };
        let dz = sub(&z, x);
        let dw = du.sub(&Mat::outer(xi, &dz).scale(delta));
        e_u = e_u.max(h.eval(&du)?);
        e_w = e_w.max(h.eval(&dw)?);
    }
    Ok(AmProbe {
        e_u,
        e_w,
        margin: e_w - e_u,
    })
}

/// `E_inf` of two maps on the same region; `margin = E(v) - E(u)`, so a
/// negative margin means the competitor `v` has lower energy.
pub fn competitor_probe(
    u: &MapFamily,
    v: &MapFamily,
    h: &Hamiltonian,
    region: &Domain,
    samples: usize,
) -> Result<AmProbe> {
    let e_u = family_energy_inf(u, h, region, samples)?;
    let e_w = family_energy_inf(v, h, region, samples)?;
    Ok(AmProbe {
        e_u,
        e_w,
        margin: e_w - e_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::euclidean_hamiltonian;
    use crate::linalg::svd;
    use crate::solutions::{affine_map, circle_curve_map, constant_map, exp_diff_map};
    use std::f64::consts::PI;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(5, 3), 2.0 / 3.0 + 1.0 / 9.0);
        let a = halton(10, 3, 7);
        assert_eq!(a, halton(10, 3, 7));
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn lip_of_linear_map_is_its_operator_norm() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3]]).unwrap();
        let f = affine_map(a.clone(), vec![0.0, 0.0]).unwrap();
        let est = lip_estimate(&f, &Domain::cube(2, 1.0), 100_000, 3).unwrap();
        let op = svd(&a).sigma[0];
        assert!(est.value <= op * (1.0 + 1e-12));
        assert!(est.value >= 0.99 * op, "{} vs {op}", est.value);
    }

    #[test]
    fn lip_of_constant_is_zero() {
        let f = constant_map(vec![1.0, 2.0], 2);
        let region = Domain::Box {
            lo: vec![1.0, 1.0],
            hi: vec![2.0, 2.0],
        };
        assert_eq!(lip_estimate(&f, &region, 1000, 0).unwrap().value, 0.0);
    }

    #[test]
    fn lip_estimate_is_monotone_in_pairs() {
        let f = exp_diff_map();
        let region = Domain::cube(2, 0.5);
        let mut last = 0.0;
        for n in [10, 100, 1000, 10_000] {
            let v = lip_estimate(&f, &region, n, 11).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn circle_beats_nothing_but_constant_wins() {
        let h = Hamiltonian::euclidean_weighted(2, 1, 1.0);
        let region = Domain::Box {
            lo: vec![0.0],
            hi: vec![2.0 * PI],
        };
        let c = circle_curve_map();
        let v = constant_map(vec![1.0, 0.0], 1);
        let p = competitor_probe(&c, &v, &h, &region, 1000).unwrap();
        assert!((p.e_u - 1.0).abs() < 1e-12);
        assert_eq!(p.e_w, 0.0);
        assert!(p.margin < 0.0);
    }

    #[test]
    fn affine_is_not_beaten_by_bumps() {
        let f = affine_map(Mat::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let h = euclidean_hamiltonian(1, 2);
        for xi in [1.0, -1.0] {
            for (eps, delta) in [(0.5, 0.5), (0.1, 0.9), (0.9, 0.01)] {
                let p = am_perturbation_probe(&f, &h, &[0.0, 0.0], eps, delta, &[xi], 400).unwrap();
                assert!(p.margin >= 0.0, "{p:?}");
            }
        }
    }

    #[test]
    fn probe_margin_is_linear_in_delta() {
        let f = affine_map(Mat::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let h = euclidean_hamiltonian(1, 2);
        let m: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|d| {
                am_perturbation_probe(&f, &h, &[0.0, 0.0], 0.5, *d, &[1.0], 400)
                    .unwrap()
                    .margin
            })
            .collect();
        for (k, d) in [1e-2, 1e-3, 1e-4].iter().enumerate() {
            assert!(m[k].abs() <= 1.0 * d, "{m:?}");
        }
        assert!((m[0] / m[1] - 10.0).abs() < 0.2);
    }

    #[test]
    fn ball_outside_domain_is_rejected() {
        let f = exp_diff_map();
        let h = euclidean_hamiltonian(2, 2);
        let r = am_perturbation_probe(&f, &h, &[3.0, 0.0], 0.5, 0.1, &[1.0, 0.0], 100);
        assert!(matches!(r, Err(LabError::DomainMargin { .. })));
    }
}
