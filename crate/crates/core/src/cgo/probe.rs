//! Fourier-decay probes for fields on the unit disk.
//!
//! For each `k` the probe evaluates `ĝχ_Ω(−k) = ∫_Ω g e^{ik·x} dx` directly
//! and through the product of CGO solutions,
//! `∫_Ω g u⁺u⁻ dx − ∫_Ω g e^{ik·x} R dx`, where `u⁺u⁻ = e^{ik·x}(1 + R)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use super::{build_cgo, product_modulation, Branch, CGOParameters, PotentialField, SpectralGrid};
use crate::error::Result;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Product rule on the unit disk: Gauss–Legendre in `r`, trapezoid in `θ`.
#[derive(Debug, Clone)]
pub struct PolarQuadrature {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl PolarQuadrature {
    pub fn new(n_radial: usize, n_angular: usize) -> Self {
        let (x, w) = gauss_legendre(n_radial);
        let mut points = Vec::with_capacity(n_radial * n_angular);
        let mut weights = Vec::with_capacity(n_radial * n_angular);
        let dth = 2.0 * PI / n_angular as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let r = 0.5 * (xi + 1.0);
            for j in 0..n_angular {
                let th = (j as f64 + 0.5) * dth;
                points.push((r * th.cos(), r * th.sin()));
                weights.push(0.5 * wi * r * dth);
            }
        }
        Self { points, weights }
    }

    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `∫ g e^{ik·x}` from precomputed samples of `g`.
    pub fn modulated_integral(&self, g: &[Complex64], k: Complex64) -> Complex64 {
        self.points
            .iter()
            .zip(&self.weights)
            .zip(g)
            .map(|((&(x, y), w), v)| v * Complex64::from_polar(*w, k.re * x + k.im * y))
            .sum()
    }
}

const STENCIL: usize = 6;

/// Sixth-order tensor Lagrange interpolation of a grid field.
pub fn interpolate(grid: &SpectralGrid, f: &[Complex64], x: f64, y: f64) -> Complex64 {
    let h = grid.spacing();
    let n = grid.n() as isize;
    let weights = |s: f64| -> (isize, [f64; STENCIL]) {
        let t = (s + grid.l()) / h;
        let base = (t.floor() as isize - (STENCIL as isize / 2 - 1)).clamp(0, n - STENCIL as isize);
        let mut w = [1.0; STENCIL];
        for (a, wa) in w.iter_mut().enumerate() {
            let xa = (base + a as isize) as f64;
            for b in 0..STENCIL {
                if b != a {
                    let xb = (base + b as isize) as f64;
                    *wa *= (t - xb) / (xa - xb);
                }
            }
        }
        (base, w)
    };
    let (bx, wx) = weights(x);
    let (by, wy) = weights(y);
    let mut acc = Complex64::new(0.0, 0.0);
    for (b, wyb) in wy.iter().enumerate() {
        let row = ((by + b as isize) * n) as usize;
        let mut r = Complex64::new(0.0, 0.0);
        for (a, wxa) in wx.iter().enumerate() {
            r += f[row + (bx + a as isize) as usize] * wxa;
        }
        acc += r * wyb;
    }
    acc
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayProbeOptions {
    pub n_radial: usize,
    pub n_angular: usize,
    /// Directions averaged in the decay envelope.
    pub directions: usize,
    /// Radial offsets within one period `π` averaged in the envelope.
    pub band_samples: usize,
    /// Skip the CGO side of the identity.
    pub direct_only: bool,
}

impl Default for DecayProbeOptions {
    fn default() -> Self {
        Self {
            n_radial: 128,
            n_angular: 512,
            directions: 8,
            band_samples: 4,
            direct_only: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub k_re: f64,
    pub k_im: f64,
    pub abs_k: f64,
    /// `ĝχ_Ω(−k)` by direct quadrature.
    pub direct: [f64; 2],
    /// `∫ g u⁺u⁻ − ∫ g e^{ik·x} R`.
    pub identity_rhs: [f64; 2],
    /// `∫ g u⁺u⁻`.
    pub product_integral: [f64; 2],
    /// `∫ g e^{ik·x} R`.
    pub remainder_integral: [f64; 2],
    pub residual: f64,
    /// RMS of `|ĝχ_Ω|` over directions and a one-period band in `|k|`.
    pub envelope: f64,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub label: String,
    pub rows: Vec<DecayRow>,
    /// Fitted exponent of the envelope against `|k|`.
    pub decay_exponent: f64,
}

impl DecayReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k_re, k_im, abs_k, direct_fhat, identity_rhs, residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.6e}, {:.6e}, {:.6e}, {:.10e}, {:.10e}, {:.3e}",
                r.k_re,
                r.k_im,
                r.abs_k,
                r.direct[0].hypot(r.direct[1]),
                r.identity_rhs[0].hypot(r.identity_rhs[1]),
                r.residual
            )?;
        }
        Ok(())
    }
}

/// Runs the probe for `g` (evaluated only on `Ω`) over `k_list`.
pub fn fourier_decay_probe(
    grid: &SpectralGrid,
    pot: &PotentialField,
    g: &(dyn Fn(f64, f64) -> Complex64 + Sync),
    k_list: &[Complex64],
    label: &str,
    opts: &DecayProbeOptions,
) -> Result<DecayReport> {
    let quad = PolarQuadrature::new(opts.n_radial, opts.n_angular);
    let gv: Vec<Complex64> = quad.points.iter().map(|&(x, y)| g(x, y)).collect();
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let direct = quad.modulated_integral(&gv, k);

        let mut env = 0.0;
        let nd = opts.directions.max(1);
        let nb = opts.band_samples.max(1);
        for d in 0..nd {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * d as f64 / nd as f64);
            for b in 0..nb {
                let kk = k * rot * (1.0 + PI * b as f64 / (nb as f64 * k.norm()));
                env += quad.modulated_integral(&gv, kk).norm_sqr();
            }
        }
        let envelope = (env / (nd * nb) as f64).sqrt();

        let (product, rem) = if opts.direct_only {
            (direct, Complex64::new(0.0, 0.0))
        } else {
            let plus = build_cgo(grid, pot, CGOParameters::new(k, Branch::Plus, 1)?)?;
            let minus = build_cgo(grid, pot, CGOParameters::new(k, Branch::Minus, 1)?)?;
            let m = product_modulation(&plus, &minus)?;
            let mut prod = Complex64::new(0.0, 0.0);
            let mut rem = Complex64::new(0.0, 0.0);
            for ((&(x, y), w), v) in quad.points.iter().zip(&quad.weights).zip(&gv) {
                let r = interpolate(grid, &m, x, y) - 1.0;
                let e = Complex64::from_polar(*w, k.re * x + k.im * y) * v;
                prod += e * (1.0 + r);
                rem += e * r;
            }
            (prod, rem)
        };
        let rhs = product - rem;
        rows.push(DecayRow {
            k_re: k.re,
            k_im: k.im,
            abs_k: k.norm(),
            direct: pair(direct),
            identity_rhs: pair(rhs),
            product_integral: pair(product),
            remainder_integral: pair(rem),
            residual: (direct - rhs).norm(),
            envelope,
        });
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.abs_k).collect();
    let env: Vec<f64> = rows.iter().map(|r| r.envelope).collect();
    let decay_exponent = if rows.len() >= 2 { fit_slope(&ks, &env) } else { f64::NAN };
    Ok(DecayReport {
        label: label.to_string(),
        rows,
        decay_exponent,
    })
}
