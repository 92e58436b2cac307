//! Curves `R -> R^N` with analytic first and second derivatives.

use super::kprofile::KProfile;
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Building block of separable maps `f(x) + g(y)` and of one-dimensional
/// families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Curve {
    /// `sign * radius * (cos(freq t), sin(freq t))`; unit speed when
    /// `radius * freq = 1`.
    Circle { radius: f64, freq: f64, sign: f64 },
    /// `t * direction`.
    Line { direction: Vec<f64> },
    /// `t^2 * coeff`.
    Quadratic { coeff: Vec<f64> },
    /// `int_0^t e^{i K}`, turned by a quarter when `quarter_turn` is set.
    KIntegral {
        profile: KProfile,
        quarter_turn: bool,
    },
}

impl Curve {
    pub fn circle() -> Self {
        Self::Circle {
            radius: 1.0,
            freq: 1.0,
            sign: 1.0,
        }
    }

    pub fn circle_neg() -> Self {
        Self::Circle {
            radius: 1.0,
            freq: 1.0,
            sign: -1.0,
        }
    }

    /// `f(2t)` of the unit circle, rescaled back to unit speed.
    pub fn circle_double() -> Self {
        Self::Circle {
            radius: 0.5,
            freq: 2.0,
            sign: 1.0,
        }
    }

    /// Looks up a curve by its config name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(Self::circle()),
            "circle-neg" => Ok(Self::circle_neg()),
            "circle-double" => Ok(Self::circle_double()),
            _ => Err(LabError::Config(format!("unknown curve '{name}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Circle { .. } | Self::KIntegral { .. } => 2,
            Self::Line { direction } => direction.len(),
            Self::Quadratic { coeff } => coeff.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Circle { radius, freq, sign } => {
                if !(radius.is_finite() && freq.is_finite() && (*sign == 1.0 || *sign == -1.0)) {
                    return Err(LabError::InvalidParameter(format!("bad circle {self:?}")));
                }
            }
            Self::Line { direction: v } | Self::Quadratic { coeff: v } => {
                if v.is_empty() || v.iter().any(|c| !c.is_finite()) {
                    return Err(LabError::InvalidParameter(format!("bad curve {self:?}")));
                }
            }
            Self::KIntegral { profile, .. } => profile.validate()?,
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        match self {
            Self::Circle { radius, freq, sign } => {
                let r = sign * radius;
                vec![r * (freq * t).cos(), r * (freq * t).sin()]
            }
            Self::Line { direction } => direction.iter().map(|d| t * d).collect(),
            Self::Quadratic { coeff } => coeff.iter().map(|c| t * t * c).collect(),
            Self::KIntegral {
                profile,
                quarter_turn,
            } => {
                let (c, s) = profile.exp_integral(t);
                turn(vec![c, s], *quarter_turn)
            }
        }
    }

    pub fn d1(&self, t: f64) -> Vec<f64> {
        match self {
            Self::Circle { radius, freq, sign } => {
                let r = sign * radius * freq;
                vec![-r * (freq * t).sin(), r * (freq * t).cos()]
            }
            Self::Line { direction } => direction.clone(),
            Self::Quadratic { coeff } => coeff.iter().map(|c| 2.0 * t * c).collect(),
            Self::KIntegral {
                profile,
                quarter_turn,
            } => {
                let k = profile.eval(t);
                turn(vec![k.cos(), k.sin()], *quarter_turn)
            }
        }
    }

    /// Second derivative; `None` where it does not exist.
    pub fn d2(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            Self::Circle { radius, freq, sign } => {
                let r = sign * radius * freq * freq;
                Some(vec![-r * (freq * t).cos(), -r * (freq * t).sin()])
            }
            Self::Line { direction } => Some(vec![0.0; direction.len()]),
            Self::Quadratic { coeff } => Some(coeff.iter().map(|c| 2.0 * c).collect()),
            Self::KIntegral {
                profile,
                quarter_turn,
            } => {
                let dk = profile.deriv(t)?;
                let k = profile.eval(t);
                Some(turn(vec![-dk * k.sin(), dk * k.cos()], *quarter_turn))
            }
        }
    }

    /// Distance from `t` to the nearest parameter where `d2` fails to exist.
    pub fn kink_distance(&self, t: f64) -> f64 {
        match self {
            Self::KIntegral { profile, .. } => profile.kink_distance(t),
            _ => f64::INFINITY,
        }
    }

    /// Shortest wavelength-like scale of the parameterisation; infinite when
    /// nothing finer than unit scale is present.
    pub fn length_scale(&self) -> f64 {
        match self {
            Self::KIntegral { profile, .. } => profile.length_scale(),
            _ => f64::INFINITY,
        }
    }

    pub fn twice_differentiable(&self) -> bool {
        match self {
            Self::KIntegral { profile, .. } => profile.twice_differentiable(),
            _ => true,
        }
    }

    /// Whether central differences reproduce the derivatives of this curve
    /// exactly (polynomials of degree at most two, away from kinks).
    pub fn locally_quadratic(&self) -> bool {
        match self {
            Self::Line { .. } | Self::Quadratic { .. } => true,
            Self::KIntegral { profile, .. } => matches!(profile, KProfile::Constant { .. }),
            Self::Circle { .. } => false,
        }
    }
}

/// Multiplication by `i` on `R^2 = C`.
fn turn(v: Vec<f64>, quarter: bool) -> Vec<f64> {
    if quarter {
        vec![-v[1], v[0]]
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let curves = [
            Curve::circle(),
            Curve::circle_neg(),
            Curve::circle_double(),
            Curve::Quadratic {
                coeff: vec![1.0, -2.0, 0.5],
            },
            Curve::KIntegral {
                profile: KProfile::smooth_sine(0.7),
                quarter_turn: true,
            },
        ];
        let h = 1e-5;
        for c in &curves {
            for t in [-1.3, 0.2, 2.9] {
                let fd: Vec<f64> = c
                    .value(t + h)
                    .iter()
                    .zip(c.value(t - h))
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect();
                let d1 = c.d1(t);
                assert!(
                    fd.iter().zip(&d1).all(|(a, b)| (a - b).abs() < 1e-8),
                    "{c:?}"
                );
                let fd2: Vec<f64> = c
                    .d1(t + h)
                    .iter()
                    .zip(c.d1(t - h))
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect();
                let d2 = c.d2(t).unwrap();
                assert!(
                    fd2.iter().zip(&d2).all(|(a, b)| (a - b).abs() < 1e-8),
                    "{c:?}"
                );
            }
        }
    }

    #[test]
    fn named_circles_are_unit_speed() {
        for name in ["circle", "circle-neg", "circle-double"] {
            let c = Curve::by_name(name).unwrap();
            for t in [0.0, 0.7, -3.0] {
                let s: f64 = c.d1(t).iter().map(|v| v * v).sum();
                assert!((s.sqrt() - 1.0).abs() < 1e-15);
            }
        }
        assert!(Curve::by_name("spiral").is_err());
    }

    #[test]
    fn quarter_turn_is_i() {
        assert_eq!(turn(vec![1.0, 2.0], true), vec![-2.0, 1.0]);
    }
}
