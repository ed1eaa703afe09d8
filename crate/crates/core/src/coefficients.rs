//! Closed-form coefficient catalog.
//!
//! Every catalog entry is evaluated through [`Jet2`], so the Liouville
//! potential `q = Δ√γ/√γ` comes out exact up to rounding.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::jet::Jet2;

/// Smooth radial bump `exp(1 − 1/(1 − s²))` for `s < 1`, zero beyond.
pub fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Derivative of [`bump_profile`] with respect to `s`.
pub fn bump_profile_derivative(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s * s;
        bump_profile(s) * (-2.0 * s / (w * w))
    }
}

/// `1 − smoothstep(|x − c|/ρ)`: 1 at the center, 0 for `|x − c| ≥ ρ`.
fn bump_jet(x: Jet2, y: Jet2, center: [f64; 2], radius: f64) -> Jet2 {
    let dx = x - center[0];
    let dy = y - center[1];
    let u = (dx * dx + dy * dy) * (1.0 / (radius * radius));
    if u.v >= 1.0 {
        return Jet2::constant(0.0);
    }
    if u.v == 0.0 {
        return Jet2::constant(1.0);
    }
    -smoothstep_jet(u.sqrt()) + 1.0
}

/// Isotropic scalar coefficient families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarCoefficient {
    Constant { value: f64 },
    /// `e^{αx}`
    Exponential { alpha: f64 },
    /// `(1 + β(x² + y²))²`
    RadialSquare { beta: f64 },
    /// `(1 + a·x² + b·y²)²`
    SquaredQuadratic { a: f64, b: f64 },
    /// `1 + a·(1 − smoothstep(|x − c|/ρ))`
    Bump {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

impl ScalarCoefficient {
    pub fn one() -> Self {
        Self::Constant { value: 1.0 }
    }

    pub fn jet(&self, p: Point2) -> Jet2 {
        let (x, y) = Jet2::vars(p.x, p.y);
        match *self {
            Self::Constant { value } => Jet2::constant(value),
            Self::Exponential { alpha } => (x * alpha).exp(),
            Self::RadialSquare { beta } => ((x * x + y * y) * beta + 1.0).powi(2),
            Self::SquaredQuadratic { a, b } => (x * x * a + y * y * b + 1.0).powi(2),
            Self::Bump {
                center,
                radius,
                amplitude,
            } => bump_jet(x, y, center, radius) * amplitude + 1.0,
        }
    }

    pub fn value(&self, p: Point2) -> f64 {
        self.jet(p).v
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Constant { value } => format!("const({value})"),
            Self::Exponential { alpha } => format!("exp({alpha}x)"),
            Self::RadialSquare { beta } => format!("(1+{beta}r^2)^2"),
            Self::SquaredQuadratic { a, b } => format!("(1+{a}x^2+{b}y^2)^2"),
            Self::Bump {
                center,
                radius,
                amplitude,
            } => format!(
                "bump(c=({},{}),rho={radius},a={amplitude})",
                center[0], center[1]
            ),
        }
    }

    /// `Δ√γ/√γ` at a point.
    pub fn liouville_potential_at(&self, p: Point2) -> Result<f64> {
        liouville_from_jet(self.jet(p), p)
    }

    /// Copy of the coefficient blended to 1 across the collar `1 ≤ |x| ≤ 1.3`.
    pub fn blended(&self) -> BlendedCoefficient {
        BlendedCoefficient {
            inner: self.clone(),
            r0: 1.0,
            r1: 1.3,
        }
    }
}

fn liouville_from_jet(g: Jet2, p: Point2) -> Result<f64> {
    if !(g.v > 0.0) {
        return Err(Error::Domain(format!(
            "conductivity {} is not positive at ({}, {})",
            g.v, p.x, p.y
        )));
    }
    let s = g.sqrt();
    Ok(s.laplacian() / s.v)
}

/// Rate `c` in `f(t) = e^{−c/t}`.
pub const SMOOTHSTEP_RATE: f64 = 2.0;

/// `f(t)/(f(t) + f(1−t))` with `f(t) = e^{−c/t}`: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
fn smoothstep_jet(t: Jet2) -> Jet2 {
    if t.v <= 0.0 {
        return Jet2::constant(0.0);
    }
    if t.v >= 1.0 {
        return Jet2::constant(1.0);
    }
    let f = (-(t.recip()).scale(SMOOTHSTEP_RATE)).exp();
    let one_minus = -(t - 1.0);
    let g = (-(one_minus.recip()).scale(SMOOTHSTEP_RATE)).exp();
    f / (f + g)
}

/// Scalar smooth step on `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    smoothstep_jet(Jet2::constant(t)).v
}

/// Catalog coefficient equal to itself on `|x| ≤ r0` and to 1 on `|x| ≥ r1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedCoefficient {
    pub inner: ScalarCoefficient,
    pub r0: f64,
    pub r1: f64,
}

impl BlendedCoefficient {
    pub fn jet(&self, p: Point2) -> Jet2 {
        let r = p.norm();
        if r <= self.r0 {
            return self.inner.jet(p);
        }
        if r >= self.r1 {
            return Jet2::constant(1.0);
        }
        let (x, y) = Jet2::vars(p.x, p.y);
        let rj = (x * x + y * y).sqrt();
        let t = (rj - self.r0) * (1.0 / (self.r1 - self.r0));
        let blend = -smoothstep_jet(t) + 1.0;
        (self.inner.jet(p) - 1.0) * blend + 1.0
    }

    pub fn value(&self, p: Point2) -> f64 {
        self.jet(p).v
    }

    pub fn liouville_potential_at(&self, p: Point2) -> Result<f64> {
        liouville_from_jet(self.jet(p), p)
    }
}

/// Symmetric positive definite tensor coefficient families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorCoefficient {
    Isotropic { scalar: ScalarCoefficient },
    /// Constant matrix `[[a11, a12], [a12, a22]]`.
    Constant { a11: f64, a12: f64, a22: f64 },
    /// `base·I + eps·x xᵀ`
    Radial { base: f64, eps: f64 },
    /// Principal values `l1`, `l2` with the principal axis rotating by
    /// `twist·π·x` across the disk.
    Twisted { l1: f64, l2: f64, twist: f64 },
}

impl TensorCoefficient {
    pub fn identity() -> Self {
        Self::Isotropic {
            scalar: ScalarCoefficient::one(),
        }
    }

    pub fn value(&self, p: Point2) -> Matrix2<f64> {
        match self {
            Self::Isotropic { scalar } => Matrix2::identity() * scalar.value(p),
            Self::Constant { a11, a12, a22 } => Matrix2::new(*a11, *a12, *a12, *a22),
            Self::Radial { base, eps } => Matrix2::identity() * *base + p * p.transpose() * *eps,
            Self::Twisted { l1, l2, twist } => {
                let th = twist * PI * p.x;
                let (s, c) = th.sin_cos();
                let r = Matrix2::new(c, -s, s, c);
                r * Matrix2::new(*l1, 0.0, 0.0, *l2) * r.transpose()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Isotropic { scalar } => scalar.label(),
            Self::Constant { a11, a12, a22 } => format!("const[{a11},{a12};{a12},{a22}]"),
            Self::Radial { base, eps } => format!("{base}I+{eps}xx^T"),
            Self::Twisted { l1, l2, twist } => format!("twisted({l1},{l2},{twist})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.3, -0.4),
            Point2::new(-0.7, 0.2),
            Point2::new(0.1, 0.9),
        ]
    }

    #[test]
    fn constant_has_zero_potential() {
        for p in pts() {
            assert_eq!(ScalarCoefficient::one().liouville_potential_at(p).unwrap(), 0.0);
        }
    }

    #[test]
    fn exponential_potential_is_quarter_alpha_squared() {
        let g = ScalarCoefficient::Exponential { alpha: 1.0 };
        for p in pts() {
            assert!((g.liouville_potential_at(p).unwrap() - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn squared_profile_potential() {
        // γ = (1 + x²)² has √γ = 1 + x², Δ√γ = 2; the radial family with
        // β gives √γ = 1 + βr², Δ√γ = 4β.
        let beta = 0.5;
        let g = ScalarCoefficient::RadialSquare { beta };
        for p in pts() {
            let expect = 4.0 * beta / (1.0 + beta * p.norm_squared());
            assert!((g.liouville_potential_at(p).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn one_plus_x_squared_squared() {
        let g = ScalarCoefficient::SquaredQuadratic { a: 1.0, b: 0.0 };
        for p in pts() {
            let expect = 2.0 / (1.0 + p.x * p.x);
            assert!((g.liouville_potential_at(p).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn nonpositive_conductivity_is_a_domain_error() {
        let g = ScalarCoefficient::Constant { value: -1.0 };
        assert!(matches!(
            g.liouville_potential_at(Point2::zeros()),
            Err(Error::Domain(_))
        ));
        let g = ScalarCoefficient::RadialSquare { beta: -1.0 };
        assert!(g.liouville_potential_at(Point2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn blend_is_identity_inside_and_one_outside() {
        let g = ScalarCoefficient::Exponential { alpha: 0.8 };
        let b = g.blended();
        let inside = Point2::new(0.6, 0.3);
        assert_eq!(b.value(inside), g.value(inside));
        assert_eq!(b.value(Point2::new(1.2, 0.8)), 1.0);
        assert_eq!(b.liouville_potential_at(Point2::new(0.0, 1.31)).unwrap(), 0.0);
        let mid = b.value(Point2::new(1.15, 0.0));
        assert!(mid > 1.0 && mid < g.value(Point2::new(1.15, 0.0)));
    }

    #[test]
    fn bump_profile_derivative_matches_difference() {
        for s in [0.1, 0.4, 0.75, 0.95] {
            let d = 1e-6;
            let fd = (bump_profile(s + d) - bump_profile(s - d)) / (2.0 * d);
            assert!((fd - bump_profile_derivative(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn tensors_are_spd() {
        for t in [
            TensorCoefficient::identity(),
            TensorCoefficient::Radial { base: 1.0, eps: 0.5 },
            TensorCoefficient::Twisted {
                l1: 2.0,
                l2: 0.5,
                twist: 0.5,
            },
        ] {
            for p in pts() {
                let m = t.value(p);
                assert!((m[(0, 1)] - m[(1, 0)]).abs() < 1e-15);
                assert!(crate::geometry::mesh::min_eigenvalue(&m) > 0.0);
            }
        }
    }
}
