//! Second-order forward-mode differentiation in two variables.
//!
//! A `Jet2` carries a value, its gradient and its Hessian; arithmetic
//! propagates all three exactly, so closed-form coefficients yield exact
//! Laplacians without finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; 2],
            h: [[0.0; 2]; 2],
        }
    }

    /// The coordinate functions `x` and `y` at a point.
    pub fn vars(x: f64, y: f64) -> (Self, Self) {
        (
            Self {
                v: x,
                g: [1.0, 0.0],
                h: [[0.0; 2]; 2],
            },
            Self {
                v: y,
                g: [0.0, 1.0],
                h: [[0.0; 2]; 2],
            },
        )
    }

    pub fn laplacian(&self) -> f64 {
        self.h[0][0] + self.h[1][1]
    }

    /// Applies a scalar function given its first two derivatives at `v`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = df * self.h[i][j] + d2f * self.g[i] * self.g[j];
            }
        }
        Self {
            v: f,
            g: [df * self.g[0], df * self.g[1]],
            h,
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Self {
        let nf = n as f64;
        self.chain(
            self.v.powi(n),
            nf * self.v.powi(n - 1),
            nf * (nf - 1.0) * self.v.powi(n - 2),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            v: s * self.v,
            g: [s * self.g[0], s * self.g[1]],
            h: [
                [s * self.h[0][0], s * self.h[0][1]],
                [s * self.h[1][0], s * self.h[1][1]],
            ],
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut h = self.h;
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] += o.h[i][j];
            }
        }
        Jet2 {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, c: f64) -> Jet2 {
        self.v += c;
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, c: f64) -> Jet2 {
        self + (-c)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = self.h[i][j] * o.v
                    + self.v * o.h[i][j]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        Jet2 {
            v: self.v * o.v,
            g: [
                self.g[0] * o.v + self.v * o.g[0],
                self.g[1] * o.v + self.v * o.g[1],
            ],
            h,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        self.scale(s)
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let (x, y) = Jet2::vars(0.3, -0.7);
        // f = x^2 y + y^3
        let f = x * x * y + y.powi(3);
        assert!((f.g[0] - 2.0 * 0.3 * -0.7).abs() < 1e-15);
        assert!((f.g[1] - (0.09 + 3.0 * 0.49)).abs() < 1e-15);
        assert!((f.h[0][1] - 0.6).abs() < 1e-15);
        assert!((f.laplacian() - (2.0 * -0.7 + 6.0 * -0.7)).abs() < 1e-14);
    }

    #[test]
    fn sqrt_of_square() {
        let (x, y) = Jet2::vars(0.4, 0.2);
        let r2 = x * x + y * y + 1.0;
        let s = (r2 * r2).sqrt();
        for (a, b) in [(s.v, r2.v), (s.g[0], r2.g[0]), (s.laplacian(), r2.laplacian())] {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
