//! Periodic spectral grid on `[−L, L)²` with FFT helpers and the Cauchy
//! transform symbols.
//!
//! `P` and `P̄` act on the doubled grid `[−2L, 2L)²` with the symbol of the
//! kernel `1/(2πz)` truncated to `|z| < ρ = 2L`:
//!
//! ```text
//! P̂(ξ) = (1 − J₀(ρ|ξ|)) / (iξ_c),   ξ_c = ξ₁ + iξ₂
//! ```
//!
//! For data supported in `|x| ≤ 3L/4` and evaluation points in the same
//! disk, the truncated kernel coincides with the full one and its periodic
//! images never overlap the support, so the discrete operator is the exact
//! Cauchy transform of the trigonometric interpolant.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::special::bessel_j0;

pub type CField = Vec<Complex64>;

#[derive(Clone)]
struct Plan2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plan2 {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn transpose(&self, a: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in i + 1..n {
                a.swap(i * n + j, j * n + i);
            }
        }
    }

    fn run(&self, a: &mut [Complex64], inverse: bool) {
        let f = if inverse { &self.inverse } else { &self.forward };
        f.process(a);
        self.transpose(a);
        f.process(a);
        self.transpose(a);
        if inverse {
            let s = 1.0 / (self.n * self.n) as f64;
            a.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Angular frequency of DFT index `k` for `m` points of spacing `h`;
/// `None` at the Nyquist index.
fn frequency(k: usize, m: usize, h: f64) -> Option<f64> {
    let scale = 2.0 * std::f64::consts::PI / (m as f64 * h);
    if 2 * k == m {
        None
    } else if 2 * k < m {
        Some(k as f64 * scale)
    } else {
        Some((k as f64 - m as f64) * scale)
    }
}

#[derive(Clone)]
pub struct SpectralGrid {
    l: f64,
    n: usize,
    h: f64,
    plan: Plan2,
    plan2: Plan2,
    /// Symbols of `2∂̄` and `2∂` on the base grid (zero at Nyquist).
    dbar2: Vec<Complex64>,
    d2: Vec<Complex64>,
    /// Cauchy symbols on the doubled grid.
    p_symbol: Vec<Complex64>,
    pbar_symbol: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("l", &self.l)
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralGrid {
    /// Requires `L ≥ 2` and `N ≥ 128` a power of two.
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l >= 2.0) || !l.is_finite() {
            return Err(Error::Parameter(format!("box half-width L = {l} must be >= 2")));
        }
        if n < 128 || !n.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "resolution N = {n} must be a power of two >= 128"
            )));
        }
        let mut planner = FftPlanner::new();
        let plan = Plan2::new(&mut planner, n);
        let plan2 = Plan2::new(&mut planner, 2 * n);
        let h = 2.0 * l / n as f64;

        let mut dbar2 = vec![Complex64::new(0.0, 0.0); n * n];
        let mut d2 = dbar2.clone();
        for iy in 0..n {
            for ix in 0..n {
                if let (Some(x1), Some(x2)) = (frequency(ix, n, h), frequency(iy, n, h)) {
                    let i = Complex64::i();
                    dbar2[iy * n + ix] = i * Complex64::new(x1, x2);
                    d2[iy * n + ix] = i * Complex64::new(x1, -x2);
                }
            }
        }

        let m = 2 * n;
        let rho = 2.0 * l;
        let mut p_symbol = vec![Complex64::new(0.0, 0.0); m * m];
        let mut pbar_symbol = p_symbol.clone();
        for iy in 0..m {
            for ix in 0..m {
                if let (Some(x1), Some(x2)) = (frequency(ix, m, h), frequency(iy, m, h)) {
                    let r = x1.hypot(x2);
                    if r == 0.0 {
                        continue;
                    }
                    let num = 1.0 - bessel_j0(r * rho);
                    let i = Complex64::i();
                    p_symbol[iy * m + ix] = num / (i * Complex64::new(x1, x2));
                    pbar_symbol[iy * m + ix] = num / (i * Complex64::new(x1, -x2));
                }
            }
        }
        Ok(Self {
            l,
            n,
            h,
            plan,
            plan2,
            dbar2,
            d2,
            p_symbol,
            pbar_symbol,
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinate of index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    /// Point of flat index `idx = iy·N + ix`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.coord(idx % self.n), self.coord(idx / self.n))
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64) -> CField {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.point(i);
                f(x, y)
            })
            .collect()
    }

    pub fn sample_real(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.point(i);
                f(x, y)
            })
            .collect()
    }

    /// Flat indices of grid points with `|x| ≤ r`.
    pub fn indices_within(&self, r: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let (x, y) = self.point(i);
                x * x + y * y <= r * r
            })
            .collect()
    }

    fn apply_symbol(&self, f: &[Complex64], symbol: &[Complex64]) -> CField {
        let mut a = f.to_vec();
        self.plan.run(&mut a, false);
        for (v, s) in a.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.plan.run(&mut a, true);
        a
    }

    /// Spectral `∂̄f` of a field vanishing near the box edge.
    pub fn dbar(&self, f: &[Complex64]) -> CField {
        let mut out = self.apply_symbol(f, &self.dbar2);
        out.iter_mut().for_each(|v| *v *= 0.5);
        out
    }

    /// Spectral `∂f`.
    pub fn d(&self, f: &[Complex64]) -> CField {
        let mut out = self.apply_symbol(f, &self.d2);
        out.iter_mut().for_each(|v| *v *= 0.5);
        out
    }

    /// Spectral Laplacian `4∂∂̄`.
    pub fn laplacian(&self, f: &[Complex64]) -> CField {
        let sym: Vec<Complex64> = self.dbar2.iter().zip(&self.d2).map(|(a, b)| a * b).collect();
        self.apply_symbol(f, &sym)
    }

    fn check_support(&self, g: &[Complex64]) -> Result<()> {
        if g.len() != self.len() {
            return Err(Error::Parameter(format!(
                "field has {} samples for a {}x{} grid",
                g.len(),
                self.n,
                self.n
            )));
        }
        let margin = 0.75 * self.l;
        let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, v) in g.iter().enumerate() {
            let (x, y) = self.point(i);
            if (x.abs() > margin || y.abs() > margin) && v.norm() > 1e-12 * scale {
                return Err(Error::Support(format!(
                    "field is {:e} at ({x:.4}, {y:.4}), outside the support box |x|,|y| <= {margin}",
                    v.norm()
                )));
            }
        }
        Ok(())
    }

    fn doubled_convolution(&self, g: &[Complex64], symbol: &[Complex64]) -> Result<CField> {
        self.check_support(g)?;
        let n = self.n;
        let m = 2 * n;
        let off = n / 2;
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for iy in 0..n {
            let src = &g[iy * n..(iy + 1) * n];
            a[(iy + off) * m + off..(iy + off) * m + off + n].copy_from_slice(src);
        }
        self.plan2.run(&mut a, false);
        for (v, s) in a.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.plan2.run(&mut a, true);
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for iy in 0..n {
            out[iy * n..(iy + 1) * n].copy_from_slice(&a[(iy + off) * m + off..(iy + off) * m + off + n]);
        }
        Ok(out)
    }

    /// Cauchy transform `Pg(z) = (1/2π)∫ g(w)/(z − w) dw`, inverting `2∂̄`.
    pub fn cauchy_p(&self, g: &[Complex64]) -> Result<CField> {
        self.doubled_convolution(g, &self.p_symbol)
    }

    /// Conjugate transform `P̄g(z) = (1/2π)∫ g(w)/(z̄ − w̄) dw`, inverting `2∂`.
    pub fn cauchy_pbar(&self, g: &[Complex64]) -> Result<CField> {
        self.doubled_convolution(g, &self.pbar_symbol)
    }
}

/// Discrete `L²` norm over the listed grid points.
pub fn l2_norm_on(grid: &SpectralGrid, f: &[Complex64], idx: &[usize]) -> f64 {
    let h = grid.spacing();
    (idx.iter().map(|&i| f[i].norm_sqr()).sum::<f64>() * h * h).sqrt()
}

pub fn sup_norm_on(f: &[Complex64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| f[i].norm()).fold(0.0, f64::max)
}

pub fn cauchy_p(grid: &SpectralGrid, g: &[Complex64]) -> Result<CField> {
    grid.cauchy_p(g)
}

pub fn cauchy_pbar(grid: &SpectralGrid, g: &[Complex64]) -> Result<CField> {
    grid.cauchy_pbar(g)
}
