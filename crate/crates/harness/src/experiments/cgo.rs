//! E4: CGO residuals, expansion orders and remainder uniformity over a
//! `|k|` sweep.

use std::time::Instant;

use electrothermal::cgo::{
    build_cgo, fit_slope, l2_norm_on, potential_catalog, product_modulation, remainder, schrodinger_residual,
    sup_norm_on, Branch, CGOParameters, CGOSolution, PotentialField, SpectralGrid, DEFAULT_K_SWEEP, DEFAULT_N,
};
use electrothermal::coefficients::ScalarCoefficient;
use num_complex::Complex64;

use super::{csv, spectral_l, spectral_n, tol};
use crate::catalog::parse_scalar_list;
use crate::config::{in_range, Config};
use crate::report::{cell, quoted, Outcome, Threshold};
use crate::HarnessError;

/// Order of the `+` branch expansion; gives `a_1..a_3` and so `b_1..b_3`.
const PLUS_ORDER: usize = 4;

pub struct Params {
    pub n: usize,
    pub l: f64,
    pub potentials: Vec<ScalarCoefficient>,
    pub k_sweep: Vec<f64>,
    /// Unit direction of `k`.
    pub direction: [f64; 2],
    pub residual_k: f64,
    pub tol_residual: f64,
    pub tol_expansion: f64,
    pub truncation_slope: [f64; 2],
    pub product_slope: [f64; 2],
    pub tol_b3_ratio: f64,
    pub max_runtime_s: f64,
}

fn default_potentials() -> String {
    potential_catalog()
        .iter()
        .filter_map(|c| match *c {
            ScalarCoefficient::Exponential { alpha } => Some(format!("exp:{alpha}")),
            ScalarCoefficient::RadialSquare { beta } => Some(format!("radial_square:{beta}")),
            ScalarCoefficient::Bump { center, radius, amplitude } => {
                Some(format!("bump:{},{},{radius},{amplitude}", center[0], center[1]))
            }
            _ => None,
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn pair(cfg: &Config, key: &str, default: [f64; 2]) -> Result<[f64; 2], HarnessError> {
    let v = cfg.list_or(key, &default)?;
    match v[..] {
        [a, b] if a <= b => Ok([a, b]),
        _ => Err(HarnessError::Config(format!("key '{key}' needs two ascending numbers"))),
    }
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        let k_sweep = cfg.list_or("k_sweep", &DEFAULT_K_SWEEP)?;
        if k_sweep.len() < 2 || k_sweep.windows(2).any(|w| w[0] >= w[1]) || k_sweep[0] <= 0.0 {
            return Err(HarnessError::Config("k_sweep needs at least two increasing positive values".into()));
        }
        let dir = cfg.list_or("k_direction", &[0.6, 0.8])?;
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dir.len() != 2 || !(norm > 0.0) {
            return Err(HarnessError::Config("k_direction needs two numbers, not both zero".into()));
        }
        Ok(Self {
            n: spectral_n(cfg, DEFAULT_N)?,
            l: spectral_l(cfg)?,
            potentials: parse_scalar_list(&cfg.str_or("potentials", &default_potentials()))?,
            k_sweep,
            direction: [dir[0] / norm, dir[1] / norm],
            residual_k: in_range("residual_k", cfg.parse_or("residual_k", 30.0)?, 1.0, 1e4)?,
            tol_residual: tol(cfg, "tol_residual", 1e-4)?,
            tol_expansion: tol(cfg, "tol_expansion", 1e-8)?,
            truncation_slope: pair(cfg, "truncation_slope_range", [-2.4, -1.6])?,
            product_slope: pair(cfg, "product_slope_range", [-1.3, -0.7])?,
            tol_b3_ratio: tol(cfg, "tol_b3_ratio", 5.0)?,
            max_runtime_s: tol(cfg, "max_runtime_s", 300.0)?,
        })
    }

    fn k(&self, abs_k: f64) -> Complex64 {
        Complex64::new(self.direction[0] * abs_k, self.direction[1] * abs_k)
    }
}

struct Row {
    abs_k: f64,
    r: f64,
    truncation: f64,
    product: f64,
    b: [f64; 3],
    residual_plus: f64,
    residual_minus: f64,
}

fn max_over_min(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    hi / lo
}

/// Largest disagreement between the reconstructions of `r` from
/// `b_n` and `a_1..a_{n−1}` for each available order, relative to `‖r‖∞`.
fn expansion_consistency(sol: &CGOSolution, idx: &[usize]) -> f64 {
    let kappa = sol.kappa();
    let scale = sup_norm_on(&sol.r, idx);
    let rebuild = |n: usize| -> Vec<Complex64> {
        let b = remainder(&sol.r, &sol.terms[..n - 1], kappa);
        let mut out: Vec<Complex64> = b.iter().map(|v| v / kappa.powi(n as i32)).collect();
        let mut s = Complex64::new(1.0, 0.0);
        for a in &sol.terms[..n - 1] {
            s /= kappa;
            out.iter_mut().zip(a).for_each(|(o, v)| *o += v * s);
        }
        out
    };
    (1..=sol.terms.len() + 1)
        .map(|n| {
            let v = rebuild(n);
            idx.iter().map(|&i| (v[i] - sol.r[i]).norm()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max)
}

fn sweep_row(grid: &SpectralGrid, pot: &PotentialField, k: Complex64, idx: &[usize]) -> Result<(Row, CGOSolution), HarnessError> {
    let plus = build_cgo(grid, pot, CGOParameters::new(k, Branch::Plus, PLUS_ORDER)?)?;
    let minus = build_cgo(grid, pot, CGOParameters::new(k, Branch::Minus, 1)?)?;
    let big_r: Vec<Complex64> = product_modulation(&plus, &minus)?.iter().map(|v| v - 1.0).collect();
    let b = [0, 1, 2].map(|n| l2_norm_on(grid, &remainder(&plus.r, &plus.terms[..n], plus.kappa()), idx));
    let row = Row {
        abs_k: k.norm(),
        r: l2_norm_on(grid, &plus.r, idx),
        truncation: l2_norm_on(grid, &plus.truncation_error(1), idx),
        product: l2_norm_on(grid, &big_r, idx),
        b,
        residual_plus: schrodinger_residual(grid, pot, &plus),
        residual_minus: schrodinger_residual(grid, pot, &minus),
    };
    Ok((row, plus))
}

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let start = Instant::now();
    let grid = SpectralGrid::new(p.l, p.n)?;
    let idx = grid.indices_within(1.0);

    let zero = PotentialField::zero(&grid);
    let mut zero_err = 0.0f64;
    for branch in [Branch::Plus, Branch::Minus] {
        let sol = build_cgo(&grid, &zero, CGOParameters::new(p.k(p.residual_k), branch, PLUS_ORDER)?)?;
        let terms = sol.terms.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        zero_err = zero_err.max(sup_norm_on(&sol.r, &idx)).max(terms).max(schrodinger_residual(&grid, &zero, &sol));
    }
    out.check(
        "q0_exact",
        "cgo_toolkit: q = 0 gives r = 0 and u = exp(eta.x) exactly",
        zero_err,
        Threshold::AtMost { limit: 0.0 },
    );

    let mut rows = Vec::new();
    for coef in &p.potentials {
        let pot = PotentialField::from_coefficient(&grid, coef)?;
        let label = coef.label();
        let mut sweep = Vec::with_capacity(p.k_sweep.len());
        let mut at_residual_k = None;
        for &abs_k in &p.k_sweep {
            let (row, plus) = sweep_row(&grid, &pot, p.k(abs_k), &idx)?;
            if abs_k == p.residual_k {
                at_residual_k = Some((row.residual_plus.max(row.residual_minus), plus));
            }
            sweep.push(row);
        }
        let (residual, sol) = match at_residual_k {
            Some(v) => v,
            None => {
                let (row, plus) = sweep_row(&grid, &pot, p.k(p.residual_k), &idx)?;
                (row.residual_plus.max(row.residual_minus), plus)
            }
        };
        out.check(
            format!("schrodinger_residual_k{}:{label}", p.residual_k),
            "cgo_toolkit: relative Schrodinger residual of the Neumann-series solution",
            residual,
            Threshold::AtMost { limit: p.tol_residual },
        );
        out.check(
            format!("expansion_consistency:{label}"),
            "cgo_toolkit: r = sum a_j/kappa^j + b_n/kappa^n for every order n",
            expansion_consistency(&sol, &idx),
            Threshold::AtMost { limit: p.tol_expansion },
        );
        let ks: Vec<f64> = sweep.iter().map(|r| r.abs_k).collect();
        let trunc: Vec<f64> = sweep.iter().map(|r| r.truncation).collect();
        let prod: Vec<f64> = sweep.iter().map(|r| r.product).collect();
        let b3: Vec<f64> = sweep.iter().map(|r| r.b[2]).collect();
        out.check(
            format!("truncation_slope:{label}"),
            "cgo_toolkit: |r - a1/kappa| decays like |k|^-2",
            fit_slope(&ks, &trunc),
            Threshold::Range {
                lower: p.truncation_slope[0],
                upper: p.truncation_slope[1],
            },
        );
        out.check(
            format!("product_slope:{label}"),
            "cgo_toolkit: |R| decays like 1/|k|",
            fit_slope(&ks, &prod),
            Threshold::Range {
                lower: p.product_slope[0],
                upper: p.product_slope[1],
            },
        );
        out.check(
            format!("b3_max_over_min:{label}"),
            "cgo_toolkit: the remainder b3 stays bounded over the sweep",
            max_over_min(&b3),
            Threshold::AtMost { limit: p.tol_b3_ratio },
        );
        for r in sweep {
            rows.push(format!(
                "{}, {}, {}, {}, {}, {}, {}, {}, {}, {}",
                quoted(&label),
                cell(r.abs_k),
                cell(r.r),
                cell(r.truncation),
                cell(r.product),
                cell(r.b[0]),
                cell(r.b[1]),
                cell(r.b[2]),
                cell(r.residual_plus),
                cell(r.residual_minus)
            ));
        }
    }
    out.artifact(
        "cgo_sweep.csv",
        csv(
            "potential, abs_k, r_norm, truncation1_norm, product_R_norm, b1_norm, b2_norm, b3_norm, residual_plus, residual_minus",
            rows,
        ),
    );
    out.check(
        "runtime_s",
        "cgo_toolkit: the full sweep runs within its time budget",
        start.elapsed().as_secs_f64(),
        Threshold::AtMost { limit: p.max_runtime_s },
    );
    Ok(())
}
