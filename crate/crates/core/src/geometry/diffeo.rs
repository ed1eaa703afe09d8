//! Boundary-fixing diffeomorphisms of the closed unit disk.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::Matrix2;

use super::mesh::Point2;
use crate::coefficients::{bump_profile, bump_profile_derivative};
use crate::error::{Error, Result};

pub trait Diffeomorphism: Debug + Send + Sync {
    fn forward(&self, x: Point2) -> Point2;
    fn inverse(&self, y: Point2) -> Point2;
    fn jacobian(&self, x: Point2) -> Matrix2<f64>;

    fn jacobian_det(&self, x: Point2) -> f64 {
        self.jacobian(x).determinant()
    }

    /// True only for maps known to be the identity everywhere.
    fn is_identity(&self) -> bool {
        false
    }
}

pub type DiffeoRef = Arc<dyn Diffeomorphism>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Diffeomorphism for Identity {
    fn forward(&self, x: Point2) -> Point2 {
        x
    }

    fn inverse(&self, y: Point2) -> Point2 {
        y
    }

    fn jacobian(&self, _x: Point2) -> Matrix2<f64> {
        Matrix2::identity()
    }

    fn jacobian_det(&self, _x: Point2) -> f64 {
        1.0
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// `F(x) = x + a·η(|x − c|/ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpDiffeo {
    pub center: Point2,
    pub radius: f64,
    pub amplitude: Point2,
}

pub const MAX_INVERSE_ITERATIONS: usize = 100;
pub const INVERSE_TOL: f64 = 1e-12;

impl BumpDiffeo {
    fn scaled_distance(&self, x: Point2) -> f64 {
        (x - self.center).norm() / self.radius
    }
}

impl Diffeomorphism for BumpDiffeo {
    fn forward(&self, x: Point2) -> Point2 {
        let s = self.scaled_distance(x);
        if s >= 1.0 {
            return x;
        }
        x + self.amplitude * bump_profile(s)
    }

    /// Fixed-point iteration `x ← y − a·η(|x − c|/ρ)`, a contraction with
    /// factor at most `|a|·max|η'|/ρ < 0.66` under the amplitude bound.
    fn inverse(&self, y: Point2) -> Point2 {
        let mut x = y;
        for _ in 0..MAX_INVERSE_ITERATIONS {
            let next = y - self.amplitude * bump_profile(self.scaled_distance(x));
            let step = (next - x).norm();
            x = next;
            if step <= INVERSE_TOL {
                break;
            }
        }
        x
    }

    fn jacobian(&self, x: Point2) -> Matrix2<f64> {
        let d = x - self.center;
        let r = d.norm();
        let s = r / self.radius;
        if s >= 1.0 || r == 0.0 {
            return Matrix2::identity();
        }
        // ∇η(|x−c|/ρ) = η'(s)·(x−c)/(ρ r)
        let grad = d * (bump_profile_derivative(s) / (self.radius * r));
        Matrix2::identity() + self.amplitude * grad.transpose()
    }
}

/// `outer ∘ inner`.
#[derive(Debug, Clone)]
pub struct Compose {
    pub outer: DiffeoRef,
    pub inner: DiffeoRef,
}

impl Diffeomorphism for Compose {
    fn forward(&self, x: Point2) -> Point2 {
        self.outer.forward(self.inner.forward(x))
    }

    fn inverse(&self, y: Point2) -> Point2 {
        self.inner.inverse(self.outer.inverse(y))
    }

    fn jacobian(&self, x: Point2) -> Matrix2<f64> {
        self.outer.jacobian(self.inner.forward(x)) * self.inner.jacobian(x)
    }

    fn is_identity(&self) -> bool {
        self.outer.is_identity() && self.inner.is_identity()
    }
}

/// Polar sample points of the closed disk used by validity checks.
pub fn disk_sample_grid(n_r: usize, n_theta: usize) -> Vec<Point2> {
    let mut pts = vec![Point2::zeros()];
    for i in 1..=n_r {
        let r = i as f64 / n_r as f64;
        for j in 0..n_theta {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5 * (i % 2) as f64) / n_theta as f64;
            pts.push(Point2::new(r * th.cos(), r * th.sin()));
        }
    }
    pts
}

/// Builds a bump map, checking the support and amplitude bounds and then
/// `|DF| > 0` and `F⁻¹∘F = id` on a sample grid.
pub fn make_bump_diffeo(center: Point2, radius: f64, amplitude: Point2) -> Result<BumpDiffeo> {
    if !(radius > 0.0) || !(center.norm() + radius < 1.0) {
        return Err(Error::Construction(format!(
            "bump disk (center ({}, {}), radius {radius}) is not strictly inside the unit disk",
            center.x, center.y
        )));
    }
    if amplitude.norm() > 0.3 * radius {
        return Err(Error::Construction(format!(
            "amplitude {} exceeds 0.3 * radius = {}",
            amplitude.norm(),
            0.3 * radius
        )));
    }
    let f = BumpDiffeo {
        center,
        radius,
        amplitude,
    };
    let local: Vec<Point2> = disk_sample_grid(24, 48)
        .into_iter()
        .map(|p| center + p * radius)
        .collect();
    for p in disk_sample_grid(40, 96).into_iter().chain(local) {
        let det = f.jacobian_det(p);
        if !(det > 0.0) {
            return Err(Error::Construction(format!(
                "jacobian determinant {det:e} at ({}, {})",
                p.x, p.y
            )));
        }
        let back = f.inverse(f.forward(p));
        if (back - p).norm() > 1e-8 {
            return Err(Error::Construction(format!(
                "inverse iteration failed at ({}, {})",
                p.x, p.y
            )));
        }
    }
    Ok(f)
}
