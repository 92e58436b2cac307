//! Bounded auxiliary profiles `K : R -> R` feeding the singular families.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

fn half() -> f64 {
    0.5
}
fn three() -> f64 {
    3.0
}
fn twelve() -> usize {
    12
}
fn one() -> f64 {
    1.0
}

/// `K(t)` with its sup-norm bound. Piecewise-linear is a triangle wave with
/// kinks at odd integers; the Weierstrass profile is the truncated sum
/// `sum_{k<=m} a^k cos(b^k t)` rescaled so that `sup |K| <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KProfile {
    Constant {
        value: f64,
    },
    SmoothSine {
        bound: f64,
        #[serde(default = "one")]
        freq: f64,
    },
    PiecewiseLinear {
        bound: f64,
    },
    WeierstrassTruncated {
        bound: f64,
        #[serde(default = "half")]
        a: f64,
        #[serde(default = "three")]
        b: f64,
        #[serde(default = "twelve")]
        m: usize,
    },
}

impl KProfile {
    pub fn smooth_sine(bound: f64) -> Self {
        Self::SmoothSine { bound, freq: 1.0 }
    }

    pub fn weierstrass(bound: f64) -> Self {
        Self::WeierstrassTruncated {
            bound,
            a: 0.5,
            b: 3.0,
            m: 12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { value } => value.is_finite(),
            Self::SmoothSine { bound, freq } => bound >= 0.0 && freq.is_finite() && freq > 0.0,
            Self::PiecewiseLinear { bound } => bound >= 0.0,
            Self::WeierstrassTruncated { bound, a, b, m } => {
                // the quadrature resolves frequencies up to about 1e7
                bound >= 0.0
                    && a > 0.0
                    && a < 1.0
                    && a * b > 1.0
                    && b.powi(m as i32) <= MAX_FREQUENCY
            }
        };
        if ok && self.bound().is_finite() {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!(
                "bad K profile {self:?}"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::SmoothSine { .. } => "smooth-sine",
            Self::PiecewiseLinear { .. } => "piecewise-linear",
            Self::WeierstrassTruncated { .. } => "weierstrass-truncated",
        }
    }

    pub fn bound(&self) -> f64 {
        match *self {
            Self::Constant { value } => value.abs(),
            Self::SmoothSine { bound, .. }
            | Self::PiecewiseLinear { bound }
            | Self::WeierstrassTruncated { bound, .. } => bound,
        }
    }

    /// Whether the family built on this profile has a meaningful Hessian.
    pub fn twice_differentiable(&self) -> bool {
        !matches!(self, Self::WeierstrassTruncated { .. })
    }

    /// True when `K` is piecewise constant in slope (so integrals of `K` are
    /// piecewise quadratic).
    pub fn piecewise_affine(&self) -> bool {
        matches!(self, Self::Constant { .. } | Self::PiecewiseLinear { .. })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::SmoothSine { bound, freq } => bound * (freq * t).sin(),
            Self::PiecewiseLinear { bound } => bound * triangle(t),
            Self::WeierstrassTruncated { bound, a, b, m } => {
                let mut s = 0.0;
                let (mut ak, mut bk) = (1.0, 1.0);
                for _ in 0..=m {
                    s += ak * (bk * t).cos();
                    ak *= a;
                    bk *= b;
                }
                bound * s / weierstrass_norm(a, m)
            }
        }
    }

    /// `K'(t)`; `None` exactly at a kink of the piecewise-linear profile.
    pub fn deriv(&self, t: f64) -> Option<f64> {
        match *self {
            Self::Constant { .. } => Some(0.0),
            Self::SmoothSine { bound, freq } => Some(bound * freq * (freq * t).cos()),
            Self::PiecewiseLinear { bound } => {
                if self.kink_distance(t) == 0.0 {
                    None
                } else if (t + 1.0).rem_euclid(4.0) < 2.0 {
                    Some(bound)
                } else {
                    Some(-bound)
                }
            }
            Self::WeierstrassTruncated { bound, a, b, m } => {
                let mut s = 0.0;
                let (mut ak, mut bk) = (1.0, 1.0);
                for _ in 0..=m {
                    s -= ak * bk * (bk * t).sin();
                    ak *= a;
                    bk *= b;
                }
                Some(bound * s / weierstrass_norm(a, m))
            }
        }
    }

    /// `int_0^t K`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value * t,
            Self::SmoothSine { bound, freq } => bound * (1.0 - (freq * t).cos()) / freq,
            Self::PiecewiseLinear { bound } => {
                let g = |s: f64| {
                    if s <= 2.0 {
                        0.5 * s * s - s
                    } else {
                        s - 2.0 - 0.5 * (s - 2.0) * (s - 2.0)
                    }
                };
                bound * (g((t + 1.0).rem_euclid(4.0)) - g(1.0))
            }
            Self::WeierstrassTruncated { bound, a, b, m } => {
                let mut s = 0.0;
                let (mut ak, mut bk) = (1.0, 1.0);
                for _ in 0..=m {
                    s += ak * (bk * t).sin() / bk;
                    ak *= a;
                    bk *= b;
                }
                bound * s / weierstrass_norm(a, m)
            }
        }
    }

    /// Distance from `t` to the nearest point where `K` is not differentiable.
    pub fn kink_distance(&self, t: f64) -> f64 {
        match self {
            Self::PiecewiseLinear { .. } => {
                let r = (t - 1.0).rem_euclid(2.0);
                r.min(2.0 - r)
            }
            _ => f64::INFINITY,
        }
    }

    /// Kinks of `K` strictly between `lo` and `hi`.
    pub fn kinks_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Self::PiecewiseLinear { .. } => {
                let mut out = Vec::new();
                let mut k = ((lo - 1.0) / 2.0).floor() as i64;
                loop {
                    let t = 1.0 + 2.0 * k as f64;
                    if t >= hi {
                        break;
                    }
                    if t > lo {
                        out.push(t);
                    }
                    k += 1;
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Bound on `|K'|`, used to size quadrature panels.
    pub fn slope_bound(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::SmoothSine { bound, freq } => freq * bound,
            Self::PiecewiseLinear { bound } => bound,
            Self::WeierstrassTruncated { a, b, m, bound } => {
                let slope: f64 = (0..=m).map(|k| (a * b).powi(k as i32)).sum();
                bound * slope / weierstrass_norm(a, m)
            }
        }
    }

    /// Dense-sampling check of `sup |K| <= bound` on `[-range, range]`.
    /// Returns `(observed sup, bound - observed sup)`.
    pub fn sup_check(&self, samples: usize, range: f64) -> (f64, f64) {
        let sup = (0..samples)
            .map(|k| {
                let t = -range + 2.0 * range * k as f64 / (samples.max(2) - 1) as f64;
                self.eval(t).abs()
            })
            .fold(0.0, f64::max);
        (sup, self.bound() - sup)
    }

    /// `1 / top frequency`: the scale below which `K` looks smooth.
    pub fn length_scale(&self) -> f64 {
        match self.top_frequency() {
            f if f > 0.0 => 1.0 / f,
            _ => f64::INFINITY,
        }
    }

    /// Largest angular frequency present in `K` (0 when there is none).
    fn top_frequency(&self) -> f64 {
        match *self {
            Self::SmoothSine { freq, .. } => freq,
            Self::WeierstrassTruncated { b, m, .. } => b.powi(m as i32),
            Self::Constant { .. } | Self::PiecewiseLinear { .. } => 0.0,
        }
    }

    /// Quadrature panel width: a quarter over the slope bound, and at most
    /// two radians of the top frequency.
    fn panel_width(&self) -> f64 {
        let slope = 0.25 / self.slope_bound().max(1.0);
        match self.top_frequency() {
            f if f > 0.0 => slope.min(2.0 / f),
            _ => slope,
        }
    }

    /// Composite Gauss-Legendre over `[a, b]` (either order), split at kinks.
    fn exp_integral_between(&self, a: f64, b: f64) -> (f64, f64) {
        if a == b {
            return (0.0, 0.0);
        }
        let (lo, hi, sign) = if b > a { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut cuts = vec![lo];
        cuts.extend(self.kinks_between(lo, hi));
        cuts.push(hi);
        let width = self.panel_width();
        let (mut c, mut s) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let panels = (((w[1] - w[0]) / width).ceil() as usize).max(1);
            let step = (w[1] - w[0]) / panels as f64;
            for k in 0..panels {
                let mid = w[0] + (k as f64 + 0.5) * step;
                for (x, wt) in gauss_legendre() {
                    let kv = self.eval(mid + 0.5 * step * x);
                    c += 0.5 * step * wt * kv.cos();
                    s += 0.5 * step * wt * kv.sin();
                }
            }
        }
        (sign * c, sign * s)
    }

    /// `(int_0^t cos K, int_0^t sin K)` by composite Gauss-Legendre quadrature.
    /// Profiles with a high top frequency go through a cached table of
    /// checkpoint integrals plus a short integral from the nearest checkpoint,
    /// so the cost per call stays bounded.
    pub fn exp_integral(&self, t: f64) -> (f64, f64) {
        if let Self::Constant { value } = *self {
            return (value.cos() * t, value.sin() * t);
        }
        if t == 0.0 {
            return (0.0, 0.0);
        }
        if t.abs() / self.panel_width() <= DIRECT_PANELS {
            return self.exp_integral_between(0.0, t);
        }
        let table = exp_table(self);
        let k = ((t.abs() / table.spacing).round() as usize).min(table.pos.len() - 1);
        let anchor = t.signum() * k as f64 * table.spacing;
        let (c0, s0) = if t > 0.0 { table.pos[k] } else { table.neg[k] };
        let (c1, s1) = self.exp_integral_between(anchor, t);
        (c0 + c1, s0 + s1)
    }
}

const MAX_FREQUENCY: f64 = 1e7;
const DIRECT_PANELS: f64 = 4096.0;
const TABLE_STRIDE: f64 = 64.0;
const TABLE_REACH: f64 = 3.5;

/// Checkpoint integrals `int_0^{+-k spacing} e^{iK}` for `k <= reach / spacing`.
struct ExpTable {
    spacing: f64,
    pos: Vec<(f64, f64)>,
    neg: Vec<(f64, f64)>,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn build_table(k: &KProfile) -> ExpTable {
    let spacing = TABLE_STRIDE * k.panel_width();
    let n = (TABLE_REACH / spacing).ceil() as usize;
    let run = |dir: f64| {
        let (mut c, mut s) = (Compensated::default(), Compensated::default());
        let mut out = Vec::with_capacity(n + 1);
        out.push((0.0, 0.0));
        for j in 0..n {
            let (dc, ds) =
                k.exp_integral_between(dir * j as f64 * spacing, dir * (j + 1) as f64 * spacing);
            c.add(dc);
            s.add(ds);
            out.push((c.value(), s.value()));
        }
        out
    };
    ExpTable {
        spacing,
        pos: run(1.0),
        neg: run(-1.0),
    }
}

type TableCache = Mutex<Vec<(KProfile, Arc<ExpTable>)>>;

// Built sequentially under the lock: a parallel build could steal an outer
// task that asks for the same table and deadlock on the mutex.
fn exp_table(k: &KProfile) -> Arc<ExpTable> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some((_, t)) = cache.iter().find(|(p, _)| p == k) {
        return t.clone();
    }
    let t = Arc::new(build_table(k));
    cache.push((k.clone(), t.clone()));
    t
}

fn weierstrass_norm(a: f64, m: usize) -> f64 {
    (0..=m).map(|k| a.powi(k as i32)).sum()
}

/// Triangle wave with period 4, slope +-1, range [-1, 1], `triangle(0) = 0`.
fn triangle(t: f64) -> f64 {
    1.0 - ((t + 1.0).rem_euclid(4.0) - 2.0).abs()
}

const GL_ORDER: usize = 8;

/// Nodes and weights of the 8-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_degree_15_exactly() {
        let w: f64 = gauss_legendre().iter().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let m14: f64 = gauss_legendre().iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn antiderivatives_match_quadrature_of_k() {
        let profiles = [
            KProfile::Constant { value: 0.3 },
            KProfile::smooth_sine(0.7),
            KProfile::PiecewiseLinear { bound: 0.5 },
            KProfile::weierstrass(0.6),
        ];
        for k in &profiles {
            for t in [-2.3, 0.4, 3.7] {
                let n = 200_000;
                let h = t / n as f64;
                // composite Simpson oracle
                let mut s = k.eval(0.0) + k.eval(t);
                for i in 1..n {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * k.eval(i as f64 * h);
                }
                let simpson = s * h / 3.0;
                let tol = if k.twice_differentiable() { 1e-9 } else { 1e-4 };
                assert!((k.antiderivative(t) - simpson).abs() < tol, "{k:?} at {t}");
            }
        }
    }

    #[test]
    fn sup_bounds_hold() {
        for k in [
            KProfile::smooth_sine(0.7),
            KProfile::PiecewiseLinear { bound: 0.5 },
            KProfile::weierstrass(0.7),
        ] {
            let (sup, margin) = k.sup_check(10_000, 20.0);
            assert!(margin >= 0.0 && sup > 0.0, "{k:?}");
        }
    }

    #[test]
    fn triangle_shape_and_kinks() {
        assert_eq!(triangle(0.0), 0.0);
        assert_eq!(triangle(1.0), 1.0);
        assert_eq!(triangle(-1.0), -1.0);
        assert_eq!(triangle(3.0), -1.0);
        let k = KProfile::PiecewiseLinear { bound: 1.0 };
        assert_eq!(k.kinks_between(-2.0, 4.0), vec![-1.0, 1.0, 3.0]);
        assert_eq!(k.deriv(1.0), None);
        assert_eq!(k.deriv(0.5), Some(1.0));
        assert_eq!(k.deriv(2.0), Some(-1.0));
        assert!((k.kink_distance(0.2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn exp_integral_of_sine_profile() {
        let k = KProfile::smooth_sine(0.7);
        let (c, s) = k.exp_integral(2.0);
        // trapezoid oracle with fine step
        let n = 400_000;
        let h = 2.0 / n as f64;
        let (mut co, mut so) = (0.0, 0.0);
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let kv = k.eval(i as f64 * h);
            co += w * h * kv.cos();
            so += w * h * kv.sin();
        }
        assert!((c - co).abs() < 1e-10 && (s - so).abs() < 1e-10);
        let (cn, sn) = k.exp_integral(-2.0);
        assert!((cn + c).abs() < 1e-14 && (sn - s).abs() < 1e-14);
    }

    #[test]
    fn weierstrass_exp_integral_is_consistent() {
        let k = KProfile::weierstrass(0.7);
        for t in [0.9, -2.2, 3.4] {
            // table path against one long direct integral
            let (c, s) = k.exp_integral(t);
            let (cd, sd) = k.exp_integral_between(0.0, t);
            assert!(
                (c - cd).abs() < 1e-12 && (s - sd).abs() < 1e-12,
                "{t}: {c} {cd}"
            );
            // derivative of the value is the integrand; K'' is about 3e7 here
            let h = 1e-7;
            let (cp, sp) = k.exp_integral(t + h);
            let (cm, sm) = k.exp_integral(t - h);
            let kv = k.eval(t);
            assert!(((cp - cm) / (2.0 * h) - kv.cos()).abs() < 1e-6);
            assert!(((sp - sm) / (2.0 * h) - kv.sin()).abs() < 1e-6);
        }
    }

    #[test]
    fn short_weierstrass_matches_simpson() {
        let k = KProfile::WeierstrassTruncated {
            bound: 0.7,
            a: 0.5,
            b: 3.0,
            m: 5,
        };
        let t = 1.3;
        let n = 2_000_000;
        let h = t / n as f64;
        let (mut co, mut so) = (0.0, 0.0);
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let kv = k.eval(i as f64 * h);
            co += w * kv.cos();
            so += w * kv.sin();
        }
        let (c, s) = k.exp_integral(t);
        assert!((c - co * h / 3.0).abs() < 1e-11 && (s - so * h / 3.0).abs() < 1e-11);
    }

    #[test]
    fn unresolvable_frequency_is_rejected() {
        let k = KProfile::WeierstrassTruncated {
            bound: 0.7,
            a: 0.5,
            b: 3.0,
            m: 20,
        };
        assert!(k.validate().is_err());
    }

    #[test]
    fn profile_json() {
        let k: KProfile = serde_json::from_str(r#"{"kind":"smooth-sine","bound":0.7}"#).unwrap();
        assert_eq!(k, KProfile::smooth_sine(0.7));
        let w: KProfile =
            serde_json::from_str(r#"{"kind":"weierstrass-truncated","bound":0.5}"#).unwrap();
        assert_eq!(w, KProfile::weierstrass(0.5));
        assert!(KProfile::WeierstrassTruncated {
            bound: 1.0,
            a: 0.5,
            b: 1.5,
            m: 3
        }
        .validate()
        .is_err());
    }
}
