//! Bessel functions of the first kind, orders 0 and 1.
//!
//! Small arguments use the trapezoid rule on Bessel's integral, which is
//! exponentially accurate for a periodic integrand; large arguments use the
//! Hankel asymptotic series summed to its smallest term.

use std::f64::consts::{FRAC_PI_4, PI};

const SWITCH: f64 = 25.0;

fn bessel_integral(n: u32, x: f64) -> f64 {
    let m = (64.0 + 1.5 * x).ceil() as usize;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(i as f64 * h);
    }
    s * h / PI
}

fn hankel(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 0..80 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > last || term.abs() < 1e-17 {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
    }
    let w = x - nu as f64 * PI / 2.0 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SWITCH {
        bessel_integral(0, x)
    } else {
        hankel(0, x)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    s * if x <= SWITCH {
        bessel_integral(1, x)
    } else {
        hankel(1, x)
    }
}

/// First positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Reference values from an independent implementation (SciPy).
        let cases = [
            (0.0, 1.0, 0.0),
            (1.0, 0.765_197_686_557_966_6, 0.440_050_585_744_933_5),
            (5.0, -0.177_596_771_314_338_3, -0.327_579_137_591_465_2),
            (10.0, -0.245_935_764_451_348_3, 0.043_472_746_168_861_44),
            (30.0, -0.086_367_983_581_040_23, -0.118_751_062_616_623_05),
        ];
        for (x, j0, j1) in cases {
            assert!((bessel_j0(x) - j0).abs() < 1e-13, "J0({x})");
            assert!((bessel_j1(x) - j1).abs() < 1e-13, "J1({x})");
        }
        assert!(bessel_j0(J0_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn branches_agree_at_switch() {
        for x in [24.0, 25.0, 26.0] {
            assert!((bessel_integral(0, x) - hankel(0, x)).abs() < 1e-13);
            assert!((bessel_integral(1, x) - hankel(1, x)).abs() < 1e-13);
        }
    }
}
