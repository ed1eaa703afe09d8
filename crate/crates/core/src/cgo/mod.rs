//! Complex geometrical optics solutions of `(−Δ + q)u = 0` on a periodic
//! spectral grid.
//!
//! For `η = ½(σk^⊥ + ik)` with `k^⊥ = (k₂, −k₁)`, the solution is
//! `u = e^{η·x}(1 + r)`. On the `σ = +` branch `r` solves
//! `(2∂ + ik̄)r = χP(q(1 + r))`, on the `σ = −` branch
//! `(2∂̄ + ik)r̃ = χP̄(q(1 + r̃))`. Both are solved by a Neumann series whose
//! first-order steps are conjugated Cauchy transforms, and the large-`|k|`
//! expansion `r = Σ a_j/(ik̄)^j` is computed alongside.

mod grid;
mod probe;

pub use grid::{cauchy_p, cauchy_pbar, l2_norm_on, sup_norm_on, CField, SpectralGrid};
pub use probe::{
    fit_slope, fourier_decay_probe, interpolate, DecayProbeOptions, DecayReport, DecayRow,
    PolarQuadrature,
};

use num_complex::Complex64;

use crate::coefficients::{smoothstep, ScalarCoefficient};
use crate::error::{Error, Result};
use crate::geometry::Point2;

pub const DEFAULT_L: f64 = 2.0;
pub const DEFAULT_N: usize = 512;
pub const DEFAULT_K_SWEEP: [f64; 7] = [10.0, 15.0, 20.0, 30.0, 40.0, 60.0, 80.0];
pub const MAX_ORDER: usize = 5;
pub const SERIES_TOL: f64 = 1e-10;
pub const MAX_SERIES_TERMS: usize = 30;
pub const CHI_INNER: f64 = 1.05;
pub const CHI_OUTER: f64 = 1.45;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default conductivities whose Liouville potentials form the CGO test set.
pub fn potential_catalog() -> Vec<ScalarCoefficient> {
    vec![
        ScalarCoefficient::one(),
        ScalarCoefficient::Exponential { alpha: 0.5 },
        ScalarCoefficient::RadialSquare { beta: 0.5 },
        ScalarCoefficient::Bump {
            center: [0.1, -0.2],
            radius: 0.5,
            amplitude: 0.8,
        },
    ]
}

/// Radial cutoff equal to 1 for `r ≤ r0` and 0 for `r ≥ r1`.
pub fn radial_cutoff(r: f64, r0: f64, r1: f64) -> f64 {
    1.0 - smoothstep((r - r0) / (r1 - r0))
}

/// Samples of `q` and of the cutoff `χ` on a spectral grid.
#[derive(Debug, Clone)]
pub struct PotentialField {
    label: String,
    q: CField,
    chi: Vec<f64>,
    /// Cutoff used before spectral differentiation of non-compact fields.
    chi_eval: Vec<f64>,
    sup: f64,
}

impl PotentialField {
    /// Liouville potential of a catalog coefficient blended to 1 outside
    /// the collar.
    pub fn from_coefficient(grid: &SpectralGrid, coef: &ScalarCoefficient) -> Result<Self> {
        let blended = coef.blended();
        let mut q = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (x, y) = grid.point(i);
            q.push(Complex64::new(
                blended.liouville_potential_at(Point2::new(x, y))?,
                0.0,
            ));
        }
        Self::from_samples(grid, q, coef.label())
    }

    pub fn zero(grid: &SpectralGrid) -> Self {
        Self::from_samples(grid, vec![ZERO; grid.len()], "q=0".into())
            .expect("zero potential is valid")
    }

    pub fn from_samples(grid: &SpectralGrid, q: CField, label: String) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "potential has {} samples for {} grid points",
                q.len(),
                grid.len()
            )));
        }
        if q.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Parameter("potential has non-finite samples".into()));
        }
        // q must vanish outside the support margin of the Cauchy transform.
        grid.cauchy_p(&q)?;
        let chi = grid.sample_real(|x, y| radial_cutoff(x.hypot(y), CHI_INNER, CHI_OUTER));
        let outer = 0.95 * grid.l();
        let chi_eval = grid.sample_real(|x, y| radial_cutoff(x.hypot(y), 1.1, outer));
        let sup = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            label,
            q,
            chi,
            chi_eval,
            sup,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn is_real(&self) -> bool {
        self.q.iter().all(|v| v.im == 0.0)
    }

    /// Conservative threshold `8(1 + ‖q‖∞)`; builds below it are accepted
    /// and checked for contraction at run time.
    pub fn nominal_k_min(&self) -> f64 {
        8.0 * (1.0 + self.sup)
    }

    fn times_q(&self, f: &[Complex64]) -> CField {
        f.iter().zip(&self.q).map(|(a, b)| a * b).collect()
    }

    fn times_chi(&self, mut f: CField) -> CField {
        f.iter_mut().zip(&self.chi).for_each(|(a, c)| *a *= c);
        f
    }

    fn cut_for_derivative(&self, f: &[Complex64]) -> CField {
        f.iter().zip(&self.chi_eval).map(|(a, c)| a * c).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    /// Expansion parameter: `ik̄` on the `+` branch, `ik` on the `−` branch.
    pub fn kappa(self, k: Complex64) -> Complex64 {
        match self {
            Branch::Plus => Complex64::i() * k.conj(),
            Branch::Minus => Complex64::i() * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CGOParameters {
    /// `k₁ + ik₂`.
    pub k: Complex64,
    pub branch: Branch,
    /// Expansion order `n`: coefficients `a_1..a_{n−1}` and remainder `b_n`.
    pub order: usize,
}

impl CGOParameters {
    pub fn new(k: Complex64, branch: Branch, order: usize) -> Result<Self> {
        if !(k.norm() > 0.0) || !k.re.is_finite() || !k.im.is_finite() {
            return Err(Error::Parameter(format!("wavenumber {k} must be finite and nonzero")));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Parameter(format!(
                "expansion order {order} outside 1..={MAX_ORDER}"
            )));
        }
        Ok(Self { k, branch, order })
    }

    /// `η = ½(σk^⊥ + ik)`.
    pub fn eta(&self) -> [Complex64; 2] {
        let s = self.branch.sign();
        let (k1, k2) = (self.k.re, self.k.im);
        [
            Complex64::new(0.5 * s * k2, 0.5 * k1),
            Complex64::new(-0.5 * s * k1, 0.5 * k2),
        ]
    }
}

/// `e^{±ik·x}` on the grid.
fn plane_wave(grid: &SpectralGrid, k: Complex64, sign: f64) -> CField {
    grid.sample(|x, y| Complex64::from_polar(1.0, sign * (k.re * x + k.im * y)))
}

/// `r = e^{−ik·x}P̄(e^{ik·x}g)` solving `(2∂ + ik̄)r = g` on the `+` branch;
/// `e^{−ik·x}P(e^{ik·x}g)` solving `(2∂̄ + ik)r = g` on the `−` branch.
pub fn solve_conjugated(
    grid: &SpectralGrid,
    g: &[Complex64],
    k: Complex64,
    branch: Branch,
) -> Result<CField> {
    let wave = plane_wave(grid, k, 1.0);
    let modulated: CField = g.iter().zip(&wave).map(|(a, w)| a * w).collect();
    let mut out = match branch {
        Branch::Plus => grid.cauchy_pbar(&modulated)?,
        Branch::Minus => grid.cauchy_p(&modulated)?,
    };
    out.iter_mut().zip(&wave).for_each(|(a, w)| *a *= w.conj());
    Ok(out)
}

/// Relative `L²(Ω)` residual of the first-order equation solved by
/// [`solve_conjugated`].
pub fn conjugated_residual(
    grid: &SpectralGrid,
    pot: &PotentialField,
    r: &[Complex64],
    g: &[Complex64],
    k: Complex64,
    branch: Branch,
) -> f64 {
    let cut = pot.cut_for_derivative(r);
    let d = match branch {
        Branch::Plus => grid.d(&cut),
        Branch::Minus => grid.dbar(&cut),
    };
    let kappa = branch.kappa(k);
    let res: CField = (0..grid.len())
        .map(|i| 2.0 * d[i] + kappa * r[i] - g[i])
        .collect();
    let idx = grid.indices_within(1.0);
    l2_norm_on(grid, &res, &idx) / l2_norm_on(grid, g, &idx).max(f64::MIN_POSITIVE)
}

/// `χP(q f)` on the `+` branch, `χP̄(q f)` on the `−` branch.
fn chi_cauchy_q(
    grid: &SpectralGrid,
    pot: &PotentialField,
    f: &[Complex64],
    branch: Branch,
) -> Result<CField> {
    let qf = pot.times_q(f);
    let p = match branch {
        Branch::Plus => grid.cauchy_p(&qf)?,
        Branch::Minus => grid.cauchy_pbar(&qf)?,
    };
    Ok(pot.times_chi(p))
}

/// `a_1..a_{n−1}` with `a_1 = χPq` and `a_{j+1} = −2∂a_j + χP(q a_j)`
/// (mirrored with `∂̄`, `P̄` on the `−` branch).
pub fn expansion_terms(
    grid: &SpectralGrid,
    pot: &PotentialField,
    n: usize,
    branch: Branch,
) -> Result<Vec<CField>> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::Parameter(format!(
            "expansion order {n} outside 1..={MAX_ORDER}"
        )));
    }
    let mut terms: Vec<CField> = Vec::with_capacity(n.saturating_sub(1));
    if n == 1 {
        return Ok(terms);
    }
    terms.push(chi_cauchy_q(grid, pot, &vec![ONE; grid.len()], branch)?);
    while terms.len() < n - 1 {
        let prev = terms.last().unwrap();
        let d = match branch {
            Branch::Plus => grid.d(prev),
            Branch::Minus => grid.dbar(prev),
        };
        let c = chi_cauchy_q(grid, pot, prev, branch)?;
        terms.push(d.iter().zip(&c).map(|(a, b)| -2.0 * a + b).collect());
    }
    Ok(terms)
}

/// `b_n = κⁿ(r − Σ_{j<n} a_j/κ^j)` with `κ = ik̄` or `ik` by branch.
pub fn remainder(r: &[Complex64], terms: &[CField], kappa: Complex64) -> CField {
    let n = terms.len() + 1;
    let mut partial = r.to_vec();
    let mut scale = ONE;
    for a in terms {
        scale /= kappa;
        partial.iter_mut().zip(a).for_each(|(p, v)| *p -= v * scale);
    }
    let kn = kappa.powi(n as i32);
    partial.iter_mut().for_each(|p| *p *= kn);
    partial
}

#[derive(Debug, Clone)]
pub struct CGOSolution {
    pub params: CGOParameters,
    pub r: CField,
    /// `a_1..a_{n−1}`.
    pub terms: Vec<CField>,
    /// `b_n`.
    pub remainder: CField,
    /// Number of Neumann terms summed.
    pub iterations: usize,
    /// `L²(Ω)` norm of the last Neumann term.
    pub last_term_norm: f64,
}

impl CGOSolution {
    pub fn kappa(&self) -> Complex64 {
        self.params.branch.kappa(self.params.k)
    }

    pub fn eta(&self) -> [Complex64; 2] {
        self.params.eta()
    }

    /// `u = e^{η·x}(1 + r)` on the grid.
    pub fn u(&self, grid: &SpectralGrid) -> CField {
        let [e1, e2] = self.eta();
        (0..grid.len())
            .map(|i| {
                let (x, y) = grid.point(i);
                (e1 * x + e2 * y).exp() * (ONE + self.r[i])
            })
            .collect()
    }

    /// `r` minus the first `m` expansion terms, `r − Σ_{j≤m} a_j/κ^j`.
    pub fn truncation_error(&self, m: usize) -> CField {
        let kappa = self.kappa();
        let mut out = self.r.clone();
        let mut scale = ONE;
        for a in self.terms.iter().take(m) {
            scale /= kappa;
            out.iter_mut().zip(a).for_each(|(p, v)| *p -= v * scale);
        }
        out
    }
}

/// Builds `u = e^{η·x}(1 + r)` by the Neumann series
/// `r_i = solve_conjugated(χP(q r_{i−1}))`, `r_0 = 1`.
pub fn build_cgo(
    grid: &SpectralGrid,
    pot: &PotentialField,
    params: CGOParameters,
) -> Result<CGOSolution> {
    let idx = grid.indices_within(1.0);
    let branch = params.branch;
    let mut r = vec![ZERO; grid.len()];
    let mut prev_term = vec![ONE; grid.len()];
    let mut prev_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut last_norm = 0.0;
    for step in 1..=MAX_SERIES_TERMS {
        let g = chi_cauchy_q(grid, pot, &prev_term, branch)?;
        let term = solve_conjugated(grid, &g, params.k, branch)?;
        let norm = l2_norm_on(grid, &term, &idx);
        if step > 1 && norm >= prev_norm && norm >= SERIES_TOL {
            return Err(Error::KTooSmall {
                abs_k: params.k.norm(),
                step,
                prev: prev_norm,
                next: norm,
            });
        }
        r.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
        iterations = step;
        last_norm = norm;
        if norm < SERIES_TOL {
            break;
        }
        prev_norm = norm;
        prev_term = term;
    }
    let terms = expansion_terms(grid, pot, params.order, branch)?;
    let remainder = remainder(&r, &terms, branch.kappa(params.k));
    Ok(CGOSolution {
        params,
        r,
        terms,
        remainder,
        iterations,
        last_term_norm: last_norm,
    })
}

/// Relative residual `‖(−Δ + q)u‖/‖qu‖` on `Ω`, evaluated through the
/// equivalent equation for `r` weighted by `|e^{η·x}|`. For `q ≡ 0` the
/// absolute residual is returned.
pub fn schrodinger_residual(grid: &SpectralGrid, pot: &PotentialField, sol: &CGOSolution) -> f64 {
    let cut = pot.cut_for_derivative(&sol.r);
    let lap = grid.laplacian(&cut);
    let kappa = sol.kappa();
    let first = match sol.params.branch {
        Branch::Plus => grid.dbar(&cut),
        Branch::Minus => grid.d(&cut),
    };
    let [e1, e2] = sol.eta();
    let idx = grid.indices_within(1.0);
    let log_w: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let (x, y) = grid.point(i);
            e1.re * x + e2.re * y
        })
        .collect();
    let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&i, lw) in idx.iter().zip(&log_w) {
        let w = (lw - shift).exp();
        let qu = pot.q[i] * (ONE + sol.r[i]);
        let e = -lap[i] - 2.0 * kappa * first[i] + qu;
        num += (w * e.norm()).powi(2);
        den += (w * qu.norm()).powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `1 + R = (1 + r)(1 + r̃)` for solutions on opposite branches at the same
/// `k`; `u⁺u⁻ = e^{ik·x}(1 + R)`.
pub fn product_modulation(a: &CGOSolution, b: &CGOSolution) -> Result<CField> {
    if a.params.branch == b.params.branch {
        return Err(Error::Parameter(
            "product modulation needs solutions on opposite branches".into(),
        ));
    }
    if a.params.k != b.params.k {
        return Err(Error::Parameter(format!(
            "product modulation needs equal wavenumbers, got {} and {}",
            a.params.k, b.params.k
        )));
    }
    if a.r.len() != b.r.len() {
        return Err(Error::Parameter("solutions live on different grids".into()));
    }
    Ok(a.r.iter().zip(&b.r).map(|(r, s)| (ONE + r) * (ONE + s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(2.0, 256).unwrap()
    }

    #[test]
    fn grid_parameter_ranges() {
        assert!(SpectralGrid::new(1.5, 256).is_err());
        assert!(SpectralGrid::new(2.0, 100).is_err());
        assert!(SpectralGrid::new(2.0, 64).is_err());
        assert!(SpectralGrid::new(2.0, 128).is_ok());
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = grid();
        let z = vec![ZERO; g.len()];
        assert!(g.cauchy_p(&z).unwrap().iter().all(|v| *v == ZERO));
        assert!(g.cauchy_pbar(&z).unwrap().iter().all(|v| *v == ZERO));
        let r = solve_conjugated(&g, &z, Complex64::new(20.0, 0.0), Branch::Plus).unwrap();
        assert!(r.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn support_violation_is_rejected() {
        let g = grid();
        let f = g.sample(|x, _| Complex64::new(if x > 1.7 { 1.0 } else { 0.0 }, 0.0));
        assert!(matches!(g.cauchy_p(&f), Err(Error::Support(_))));
    }

    #[test]
    fn conjugation_identity() {
        let g = grid();
        let f = g.sample(|x, y| {
            let b = radial_cutoff(x.hypot(y), 0.5, 1.2);
            Complex64::new(b * (1.0 + x), b * y * y)
        });
        let p = g.cauchy_p(&f.iter().map(|v| v.conj()).collect::<Vec<_>>()).unwrap();
        let pbar = g.cauchy_pbar(&f).unwrap();
        let worst = pbar
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b.conj()).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        // P(e^{−|z|²/s²}) = s²(1 − e^{−|z|²/s²})/(2z)
        let g = SpectralGrid::new(2.0, 256).unwrap();
        let s = 0.25;
        let f = g.sample(|x, y| Complex64::new((-(x * x + y * y) / (s * s)).exp(), 0.0));
        let p = g.cauchy_p(&f).unwrap();
        let mut worst = 0.0f64;
        for i in g.indices_within(1.2) {
            let (x, y) = g.point(i);
            let z = Complex64::new(x, y);
            let r2 = x * x + y * y;
            let exact = if r2 == 0.0 {
                ZERO
            } else {
                s * s * (1.0 - (-r2 / (s * s)).exp()) / (2.0 * z)
            };
            worst = worst.max((p[i] - exact).norm());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn eta_is_null() {
        for branch in [Branch::Plus, Branch::Minus] {
            let p = CGOParameters::new(Complex64::new(12.0, -5.0), branch, 3).unwrap();
            let [a, b] = p.eta();
            assert!((a * a + b * b).norm() < 1e-13);
            // η⁺ + η⁻ = ik
            let q = CGOParameters::new(p.k, branch.opposite(), 3).unwrap();
            let [c, d] = q.eta();
            assert!((a + c - Complex64::new(0.0, 12.0)).norm() < 1e-14);
            assert!((b + d - Complex64::new(0.0, -5.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn order_cap() {
        let g = grid();
        let pot = PotentialField::zero(&g);
        assert!(expansion_terms(&g, &pot, 6, Branch::Plus).is_err());
        assert!(CGOParameters::new(Complex64::new(10.0, 0.0), Branch::Plus, 0).is_err());
        let t = expansion_terms(&g, &pot, 5, Branch::Plus).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|a| a.iter().all(|v| *v == ZERO)));
    }

    #[test]
    fn zero_potential_gives_plane_exponential() {
        let g = grid();
        let pot = PotentialField::zero(&g);
        let p = CGOParameters::new(Complex64::new(7.0, 3.0), Branch::Plus, 3).unwrap();
        let sol = build_cgo(&g, &pot, p).unwrap();
        assert!(sol.r.iter().all(|v| *v == ZERO));
        let u = sol.u(&g);
        let [e1, e2] = p.eta();
        for i in g.indices_within(1.0).into_iter().step_by(97) {
            let (x, y) = g.point(i);
            assert_eq!(u[i], (e1 * x + e2 * y).exp());
        }
        assert!(schrodinger_residual(&g, &pot, &sol) == 0.0);
    }

    #[test]
    fn branch_mismatch_is_rejected() {
        let g = grid();
        let pot = PotentialField::zero(&g);
        let k = Complex64::new(10.0, 0.0);
        let a = build_cgo(&g, &pot, CGOParameters::new(k, Branch::Plus, 1).unwrap()).unwrap();
        let b = build_cgo(&g, &pot, CGOParameters::new(k, Branch::Plus, 1).unwrap()).unwrap();
        assert!(product_modulation(&a, &b).is_err());
        let c = build_cgo(&g, &pot, CGOParameters::new(k * 2.0, Branch::Minus, 1).unwrap()).unwrap();
        assert!(product_modulation(&a, &c).is_err());
        let d = build_cgo(&g, &pot, CGOParameters::new(k, Branch::Minus, 1).unwrap()).unwrap();
        let m = product_modulation(&a, &d).unwrap();
        assert!(m.iter().all(|v| *v == ONE));
    }
}
