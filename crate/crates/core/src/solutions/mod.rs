//! Explicit map families with analytic jets, the finite-difference jet oracle
//! and interface detection for separable maps.

mod curves;
mod interface;
mod kprofile;

pub use curves::Curve;
pub use interface::{interface_locus, GridSpec, InterfacePoint};
pub use kprofile::KProfile;

use crate::error::{LabError, Result};
use crate::tensor::{dot, norm, Jet, Mat, Sym3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Region attached to a family. Points are sampled from it and finite
/// difference stencils are kept inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Domain {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `{|x + y| < half_width, |x - y| < half_width}` in the plane.
    Rhombus {
        half_width: f64,
    },
}

impl Domain {
    pub fn cube(n: usize, r: f64) -> Self {
        Self::Box {
            lo: vec![-r; n],
            hi: vec![r; n],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Rhombus { .. } => 2,
        }
    }

    /// Euclidean distance to the boundary, negative outside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Self::Rhombus { half_width } => {
                let s = half_width - (x[0] + x[1]).abs();
                let d = half_width - (x[0] - x[1]).abs();
                s.min(d) / 2f64.sqrt()
            }
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Box { lo, hi } => (lo.clone(), hi.clone()),
            Self::Rhombus { half_width } => (vec![-half_width; 2], vec![*half_width; 2]),
        }
    }

    /// Uniform sample among points at distance at least `margin` from the
    /// boundary (rejection from the bounding box).
    pub fn sample<R: Rng>(&self, rng: &mut R, margin: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        loop {
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect();
            if self.margin(&x) >= margin {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilyKind {
    /// `u(x, y) = f(x) + g(y)`.
    Separable {
        f: Curve,
        g: Curve,
    },
    /// `u(x) = c(x)`, `n = 1`.
    CurveMap {
        curve: Curve,
    },
    /// `u(x) = (x.(b+a)/2 + int_0^{x.(b-a)/2} K) eta`.
    RankOne {
        eta: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        k: KProfile,
    },
    /// `s_1 |x|^{4/3} + s_2 |y|^{4/3}`, optionally embedded as `(w, 0)`.
    ScalarAronsson {
        signs: [f64; 2],
        embedded: bool,
    },
    Affine {
        matrix: Mat,
        offset: Vec<f64>,
    },
    Constant {
        value: Vec<f64>,
        source_dim: usize,
    },
}

/// A named explicit map `R^n -> R^N` with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapFamily {
    pub name: String,
    pub kind: FamilyKind,
    pub domain: Domain,
}

fn rhombus() -> Domain {
    Domain::Rhombus { half_width: PI }
}

/// `u(x, y) = e^{ix} - e^{iy}`.
pub fn exp_diff_map() -> MapFamily {
    MapFamily {
        name: "exp-diff".into(),
        kind: FamilyKind::Separable {
            f: Curve::circle(),
            g: Curve::circle_neg(),
        },
        domain: rhombus(),
    }
}

/// `u(x, y) = e^{ix} + e^{iy}`.
pub fn exp_sum_map() -> MapFamily {
    MapFamily {
        name: "exp-sum".into(),
        kind: FamilyKind::Separable {
            f: Curve::circle(),
            g: Curve::circle(),
        },
        domain: rhombus(),
    }
}

pub fn separable_map(f: Curve, g: Curve, domain: Domain) -> Result<MapFamily> {
    f.validate()?;
    g.validate()?;
    if f.dim() != g.dim() || domain.dim() != 2 {
        return Err(LabError::DimensionMismatch(
            "separable curves/domain".into(),
        ));
    }
    Ok(MapFamily {
        name: "separable".into(),
        kind: FamilyKind::Separable { f, g },
        domain,
    })
}

/// `u(x, y) = int_0^x e^{iK} + i int_0^y e^{iK}`.
pub fn k_integral_map(k: KProfile) -> Result<MapFamily> {
    k.validate()?;
    let curve = |quarter_turn| Curve::KIntegral {
        profile: k.clone(),
        quarter_turn,
    };
    Ok(MapFamily {
        name: format!("k-integral/{}", k.name()),
        kind: FamilyKind::Separable {
            f: curve(false),
            g: curve(true),
        },
        domain: Domain::cube(2, 3.0),
    })
}

pub fn rank_one_map(eta: &[f64], a: &[f64], b: &[f64], k: KProfile) -> Result<MapFamily> {
    k.validate()?;
    if a.len() != b.len() || a.is_empty() || eta.is_empty() {
        return Err(LabError::DimensionMismatch(
            "rank-one map: a, b, eta".into(),
        ));
    }
    if k.bound() >= 1.0 {
        return Err(LabError::InvalidParameter(format!(
            "rank-one map needs sup|K| < 1, got {}",
            k.bound()
        )));
    }
    let len = norm(eta);
    if !(len > 0.0) {
        return Err(LabError::InvalidParameter("eta must be non-zero".into()));
    }
    Ok(MapFamily {
        name: format!("rank-one/{}", k.name()),
        kind: FamilyKind::RankOne {
            eta: eta.iter().map(|v| v / len).collect(),
            a: a.to_vec(),
            b: b.to_vec(),
            k,
        },
        domain: Domain::cube(a.len(), 2.0),
    })
}

pub fn scalar_aronsson_map(signs: [f64; 2]) -> MapFamily {
    MapFamily {
        name: "scalar-aronsson".into(),
        kind: FamilyKind::ScalarAronsson {
            signs,
            embedded: false,
        },
        domain: Domain::cube(2, 2.0),
    }
}

/// `(s_1 |x|^{4/3} + s_2 |y|^{4/3}, 0)`.
pub fn embedded_aronsson_map(signs: [f64; 2]) -> MapFamily {
    MapFamily {
        name: "embedded-aronsson".into(),
        kind: FamilyKind::ScalarAronsson {
            signs,
            embedded: true,
        },
        domain: Domain::cube(2, 2.0),
    }
}

pub fn affine_map(matrix: Mat, offset: Vec<f64>) -> Result<MapFamily> {
    if offset.len() != matrix.rows() {
        return Err(LabError::DimensionMismatch("affine offset".into()));
    }
    let n = matrix.cols();
    Ok(MapFamily {
        name: "affine".into(),
        kind: FamilyKind::Affine { matrix, offset },
        domain: Domain::cube(n, 2.0),
    })
}

pub fn constant_map(value: Vec<f64>, source_dim: usize) -> MapFamily {
    MapFamily {
        name: "constant".into(),
        kind: FamilyKind::Constant { value, source_dim },
        domain: Domain::Box {
            lo: vec![0.0; source_dim],
            hi: vec![2.0 * PI; source_dim],
        },
    }
}

/// Scalar saddle `x^2 - y^2` on `(-1, 1)^2`.
pub fn saddle_map() -> MapFamily {
    MapFamily {
        name: "saddle".into(),
        kind: FamilyKind::Separable {
            f: Curve::Quadratic { coeff: vec![1.0] },
            g: Curve::Quadratic { coeff: vec![-1.0] },
        },
        domain: Domain::cube(2, 1.0),
    }
}

/// The unit circle `x -> (cos x, sin x)` on `(0, 2 pi)`.
pub fn circle_curve_map() -> MapFamily {
    MapFamily {
        name: "circle-curve".into(),
        kind: FamilyKind::CurveMap {
            curve: Curve::circle(),
        },
        domain: Domain::Box {
            lo: vec![0.0],
            hi: vec![2.0 * PI],
        },
    }
}

/// `x -> (x^2, 0)`.
pub fn parabola_curve_map() -> MapFamily {
    MapFamily {
        name: "parabola-curve".into(),
        kind: FamilyKind::CurveMap {
            curve: Curve::Quadratic {
                coeff: vec![1.0, 0.0],
            },
        },
        domain: Domain::cube(1, 2.0),
    }
}

impl MapFamily {
    pub fn source_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::Separable { .. } | FamilyKind::ScalarAronsson { .. } => 2,
            FamilyKind::CurveMap { .. } => 1,
            FamilyKind::RankOne { a, .. } => a.len(),
            FamilyKind::Affine { matrix, .. } => matrix.cols(),
            FamilyKind::Constant { source_dim, .. } => *source_dim,
        }
    }

    pub fn target_dim(&self) -> usize {
        match &self.kind {
            FamilyKind::Separable { f, .. } => f.dim(),
            FamilyKind::CurveMap { curve } => curve.dim(),
            FamilyKind::RankOne { eta, .. } => eta.len(),
            FamilyKind::ScalarAronsson { embedded, .. } => {
                if *embedded {
                    2
                } else {
                    1
                }
            }
            FamilyKind::Affine { matrix, .. } => matrix.rows(),
            FamilyKind::Constant { value, .. } => value.len(),
        }
    }

    /// 2 when analytic Hessians are meaningful, 1 when only first-order
    /// quantities are certified.
    pub fn jet_order(&self) -> usize {
        let smooth = match &self.kind {
            FamilyKind::Separable { f, g } => f.twice_differentiable() && g.twice_differentiable(),
            FamilyKind::CurveMap { curve } => curve.twice_differentiable(),
            FamilyKind::RankOne { k, .. } => k.twice_differentiable(),
            _ => true,
        };
        if smooth {
            2
        } else {
            1
        }
    }

    /// Whether the map is a polynomial of degree at most two away from its
    /// kinks, so that central differences are exact up to rounding.
    pub fn locally_quadratic(&self) -> bool {
        match &self.kind {
            FamilyKind::Separable { f, g } => f.locally_quadratic() && g.locally_quadratic(),
            FamilyKind::CurveMap { curve } => curve.locally_quadratic(),
            FamilyKind::RankOne { k, .. } => k.piecewise_affine(),
            FamilyKind::ScalarAronsson { .. } => false,
            FamilyKind::Affine { .. } | FamilyKind::Constant { .. } => true,
        }
    }

    /// Scale of the finest oscillation in the map. Difference steps well below
    /// it are in the asymptotic regime.
    pub fn length_scale(&self) -> f64 {
        match &self.kind {
            FamilyKind::Separable { f, g } => f.length_scale().min(g.length_scale()),
            FamilyKind::CurveMap { curve } => curve.length_scale(),
            FamilyKind::RankOne { a, b, k, .. } => {
                let nd = norm(&half_diff(a, b));
                if nd == 0.0 {
                    f64::INFINITY
                } else {
                    k.length_scale() / nd
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Distance from `x` to the set where the map fails to be `C^2`.
    pub fn smooth_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FamilyKind::Separable { f, g } => f.kink_distance(x[0]).min(g.kink_distance(x[1])),
            FamilyKind::CurveMap { curve } => curve.kink_distance(x[0]),
            FamilyKind::RankOne { a, b, k, .. } => {
                let d = half_diff(a, b);
                let nd = norm(&d);
                if nd == 0.0 {
                    f64::INFINITY
                } else {
                    k.kink_distance(dot(x, &d)) / nd
                }
            }
            FamilyKind::ScalarAronsson { .. } => x[0].abs().min(x[1].abs()),
            _ => f64::INFINITY,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.source_dim() {
            return Err(LabError::DimensionMismatch(format!(
                "{}: point of length {} for n = {}",
                self.name,
                x.len(),
                self.source_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("point"));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(match &self.kind {
            FamilyKind::Separable { f, g } => f
                .value(x[0])
                .iter()
                .zip(g.value(x[1]))
                .map(|(a, b)| a + b)
                .collect(),
            FamilyKind::CurveMap { curve } => curve.value(x[0]),
            FamilyKind::RankOne { eta, a, b, k } => {
                let s = dot(x, &midpoint(a, b)) + k.antiderivative(dot(x, &half_diff(a, b)));
                eta.iter().map(|e| s * e).collect()
            }
            FamilyKind::ScalarAronsson { signs, embedded } => {
                let w =
                    signs[0] * x[0].abs().powf(4.0 / 3.0) + signs[1] * x[1].abs().powf(4.0 / 3.0);
                if *embedded {
                    vec![w, 0.0]
                } else {
                    vec![w]
                }
            }
            FamilyKind::Affine { matrix, offset } => matrix
                .apply(x)
                .iter()
                .zip(offset)
                .map(|(a, b)| a + b)
                .collect(),
            FamilyKind::Constant { value, .. } => value.clone(),
        })
    }

    /// Analytic `Du(x)`; available wherever the map is `C^1`.
    pub fn grad(&self, x: &[f64]) -> Result<Mat> {
        self.check_point(x)?;
        let nn = self.target_dim();
        let n = self.source_dim();
        Ok(match &self.kind {
            FamilyKind::Separable { f, g } => {
                let (fp, gp) = (f.d1(x[0]), g.d1(x[1]));
                Mat::from_fn(nn, 2, |a, i| if i == 0 { fp[a] } else { gp[a] })
            }
            FamilyKind::CurveMap { curve } => Mat::new(nn, 1, curve.d1(x[0]))?,
            FamilyKind::RankOne { eta, a, b, k } => {
                let d = half_diff(a, b);
                let m = midpoint(a, b);
                let kv = k.eval(dot(x, &d));
                Mat::from_fn(nn, n, |al, i| eta[al] * (m[i] + kv * d[i]))
            }
            FamilyKind::ScalarAronsson { signs, .. } => {
                let g = |s: f64, t: f64| s * 4.0 / 3.0 * t.signum() * t.abs().cbrt();
                let row = [g(signs[0], x[0]), g(signs[1], x[1])];
                Mat::from_fn(nn, 2, |a, i| if a == 0 { row[i] } else { 0.0 })
            }
            FamilyKind::Affine { matrix, .. } => matrix.clone(),
            FamilyKind::Constant { .. } => Mat::zeros(nn, n),
        })
    }

    /// Analytic jet `(u, Du, D^2u)` at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        let value = self.value(x)?;
        let grad = self.grad(x)?;
        let nn = self.target_dim();
        let n = self.source_dim();
        let singular = || LabError::NonSmoothPoint(x.to_vec());
        if self.smooth_distance(x) == 0.0 {
            return Err(singular());
        }
        let hess = match &self.kind {
            FamilyKind::Separable { f, g } => {
                let fpp = f.d2(x[0]).ok_or_else(singular)?;
                let gpp = g.d2(x[1]).ok_or_else(singular)?;
                let mut h = Sym3::zeros(nn, 2);
                for a in 0..nn {
                    h.set_sym(a, 0, 0, fpp[a]);
                    h.set_sym(a, 1, 1, gpp[a]);
                }
                h
            }
            FamilyKind::CurveMap { curve } => {
                Sym3::new(nn, 1, curve.d2(x[0]).ok_or_else(singular)?)?
            }
            FamilyKind::RankOne { eta, a, b, k } => {
                let d = half_diff(a, b);
                let dk = k.deriv(dot(x, &d)).ok_or_else(singular)?;
                Sym3::from_fn(nn, n, |al, i, j| eta[al] * dk * d[i] * d[j])?
            }
            FamilyKind::ScalarAronsson { signs, .. } => {
                let c = |s: f64, t: f64| s * 4.0 / 9.0 / t.abs().powf(2.0 / 3.0);
                let mut h = Sym3::zeros(nn, 2);
                h.set_sym(0, 0, 0, c(signs[0], x[0]));
                h.set_sym(0, 1, 1, c(signs[1], x[1]));
                h
            }
            FamilyKind::Affine { .. } | FamilyKind::Constant { .. } => Sym3::zeros(nn, n),
        };
        Jet::new(x.to_vec(), value, grad, hess)
    }

    /// Coefficient `lambda(x) = 1/2 - 1/2 K(x.(b-a)/2)` with
    /// `Du = eta (x) (lambda a + (1 - lambda) b)`; rank-one families only.
    pub fn combination_coefficient(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            FamilyKind::RankOne { a, b, k, .. } => {
                Some(0.5 - 0.5 * k.eval(dot(x, &half_diff(a, b))))
            }
            _ => None,
        }
    }
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn half_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (y - x)).collect()
}

/// Second-order central-difference jet computed from `value` alone.
pub fn fd_jet(family: &MapFamily, x: &[f64], h: f64) -> Result<Jet> {
    if !(h > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    if family.domain.margin(x) < 2.0 * h {
        return Err(LabError::DomainMargin {
            point: x.to_vec(),
            margin: 2.0 * h,
        });
    }
    let n = family.source_dim();
    let nn = family.target_dim();
    let at = |offsets: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in offsets {
            y[i] += s;
        }
        family.value(&y)
    };
    let u0 = family.value(x)?;
    let mut grad = Mat::zeros(nn, n);
    let mut hess = Sym3::zeros(nn, n);
    for i in 0..n {
        let up = at(&[(i, h)])?;
        let um = at(&[(i, -h)])?;
        for a in 0..nn {
            grad.set(a, i, (up[a] - um[a]) / (2.0 * h));
            hess.set_sym(a, i, i, (up[a] - 2.0 * u0[a] + um[a]) / (h * h));
        }
        for j in (i + 1)..n {
            let pp = at(&[(i, h), (j, h)])?;
            let pm = at(&[(i, h), (j, -h)])?;
            let mp = at(&[(i, -h), (j, h)])?;
            let mm = at(&[(i, -h), (j, -h)])?;
            for a in 0..nn {
                hess.set_sym(a, i, j, (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h));
            }
        }
    }
    Jet::new(x.to_vec(), u0, grad, hess)
}

/// Curve selector in configs: a registered name or a full description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveSpec {
    Name(String),
    Full(Curve),
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve> {
        match self {
            Self::Name(n) => Curve::by_name(n),
            Self::Full(c) => Ok(c.clone()),
        }
    }
}

fn aronsson_signs() -> [f64; 2] {
    [1.0, -1.0]
}

/// Family selector in JSON configs, e.g.
/// `{"family":"separable","f":"circle","g":"circle-neg"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    ExpDiff,
    ExpSum,
    Separable {
        f: CurveSpec,
        g: CurveSpec,
        #[serde(default)]
        domain: Option<Domain>,
    },
    KIntegral {
        k: KProfile,
    },
    RankOne {
        eta: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        k: KProfile,
    },
    ScalarAronsson {
        #[serde(default = "aronsson_signs")]
        signs: [f64; 2],
    },
    EmbeddedAronsson {
        #[serde(default = "aronsson_signs")]
        signs: [f64; 2],
    },
    Affine {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Option<Vec<f64>>,
    },
    Constant {
        value: Vec<f64>,
        source_dim: usize,
    },
    Saddle,
    CircleCurve,
    ParabolaCurve,
}

impl FamilySpec {
    pub fn build(&self) -> Result<MapFamily> {
        match self {
            Self::ExpDiff => Ok(exp_diff_map()),
            Self::ExpSum => Ok(exp_sum_map()),
            Self::Separable { f, g, domain } => separable_map(
                f.build()?,
                g.build()?,
                domain.clone().unwrap_or_else(rhombus),
            ),
            Self::KIntegral { k } => k_integral_map(k.clone()),
            Self::RankOne { eta, a, b, k } => rank_one_map(eta, a, b, k.clone()),
            Self::ScalarAronsson { signs } => Ok(scalar_aronsson_map(*signs)),
            Self::EmbeddedAronsson { signs } => Ok(embedded_aronsson_map(*signs)),
            Self::Affine { matrix, offset } => {
                let m = Mat::from_rows(matrix)?;
                let c = offset.clone().unwrap_or_else(|| vec![0.0; m.rows()]);
                affine_map(m, c)
            }
            Self::Constant { value, source_dim } => Ok(constant_map(value.clone(), *source_dim)),
            Self::Saddle => Ok(saddle_map()),
            Self::CircleCurve => Ok(circle_curve_map()),
            Self::ParabolaCurve => Ok(parabola_curve_map()),
        }
    }
}

/// Every registered family in a representative parameterisation.
pub fn registry() -> Vec<MapFamily> {
    let eta = [0.6, 0.8];
    let (a, b) = ([1.0, 0.0], [0.0, 1.0]);
    let ks = [
        KProfile::Constant { value: 0.3 },
        KProfile::smooth_sine(0.7),
        KProfile::PiecewiseLinear { bound: 0.5 },
        KProfile::weierstrass(0.7),
    ];
    let mut out = vec![
        exp_diff_map(),
        exp_sum_map(),
        separable_map(Curve::circle(), Curve::circle_double(), rhombus()).expect("valid curves"),
        separable_map(
            Curve::Line {
                direction: vec![0.6, 0.8],
            },
            Curve::Line {
                direction: vec![0.6, 0.8],
            },
            Domain::cube(2, 2.0),
        )
        .expect("valid curves"),
    ];
    for k in &ks {
        out.push(k_integral_map(k.clone()).expect("valid profile"));
        out.push(rank_one_map(&eta, &a, &b, k.clone()).expect("valid profile"));
    }
    out.extend([
        scalar_aronsson_map([1.0, -1.0]),
        scalar_aronsson_map([1.0, 1.0]),
        saddle_map(),
        embedded_aronsson_map([1.0, -1.0]),
        affine_map(
            Mat::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.0, 1.0]]).expect("rows"),
            vec![0.1, 0.2, 0.3],
        )
        .expect("dims"),
        constant_map(vec![1.0, 0.0], 1),
        circle_curve_map(),
        parabola_curve_map(),
    ]);
    out
}
