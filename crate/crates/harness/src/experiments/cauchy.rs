//! E6: `P(χ_D)` closed form and the inverse properties `2∂̄P = id`,
//! `2∂P̄ = id` on Ω.

use electrothermal::cgo::{potential_catalog, radial_cutoff, PotentialField, SpectralGrid, DEFAULT_N};
use electrothermal::coefficients::{bump_profile, ScalarCoefficient};
use num_complex::Complex64;

use super::{csv, spectral_l, spectral_n, tol};
use crate::config::Config;
use crate::report::{cell, quoted, Outcome, Threshold};
use crate::HarnessError;

pub struct Params {
    pub n: usize,
    pub l: f64,
    pub tol_closed_form: f64,
    pub tol_inverse: f64,
    pub tol_conjugation: f64,
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        Ok(Self {
            n: spectral_n(cfg, DEFAULT_N)?,
            l: spectral_l(cfg)?,
            tol_closed_form: tol(cfg, "tol_closed_form", 2e-3)?,
            tol_inverse: tol(cfg, "tol_inverse", 1e-6)?,
            tol_conjugation: tol(cfg, "tol_conjugation", 1e-12)?,
        })
    }
}

/// Fraction of each grid cell inside the unit disk, from 8×8 subsamples.
pub fn disk_indicator(g: &SpectralGrid) -> Vec<Complex64> {
    let h = g.spacing();
    g.sample(|x, y| {
        let mut inside = 0;
        for a in 0..8 {
            for b in 0..8 {
                let (sx, sy) = (x + (a as f64 - 3.5) * h / 8.0, y + (b as f64 - 3.5) * h / 8.0);
                if sx * sx + sy * sy <= 1.0 {
                    inside += 1;
                }
            }
        }
        Complex64::new(inside as f64 / 64.0, 0.0)
    })
}

/// Smooth test fields compactly supported inside the support box.
pub fn smooth_fields(g: &SpectralGrid) -> Vec<(&'static str, Vec<Complex64>)> {
    vec![
        ("gaussian", g.sample(|x, y| Complex64::new((-(x * x + y * y) / 0.08).exp(), 0.0))),
        ("bump", g.sample(|x, y| Complex64::new(bump_profile(x.hypot(y) / 1.2), 0.0))),
        (
            "modulated_bump",
            g.sample(|x, y| {
                let b = bump_profile(((x - 0.2).powi(2) + y * y).sqrt() / 0.9);
                b * Complex64::from_polar(1.0 + 0.5 * y, 5.0 * x)
            }),
        ),
        (
            "complex_cutoff",
            g.sample(|x, y| radial_cutoff(x.hypot(y), 0.6, 1.3) * Complex64::new(1.0 + x * y, x - y * y)),
        ),
    ]
}

fn max_diff_on(a: &[Complex64], b: &[Complex64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| (a[i] - b[i]).norm()).fold(0.0, f64::max)
}

fn closed_form(p: &Params, g: &SpectralGrid, out: &mut Outcome) -> Result<(), HarnessError> {
    let pchi = g.cauchy_p(&disk_indicator(g))?;
    let exact = |x: f64, y: f64| {
        let z = Complex64::new(x, y);
        if z.norm() <= 1.0 {
            z.conj() / 2.0
        } else {
            1.0 / (2.0 * z)
        }
    };
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for i in g.indices_within(1.4) {
        let (x, y) = g.point(i);
        let e = (pchi[i] - exact(x, y)).norm();
        if x.hypot(y) <= 1.0 {
            inside = inside.max(e);
        } else {
            outside = outside.max(e);
        }
    }
    out.check(
        "disk_closed_form_interior",
        "cgo_toolkit: P(chi_D) = conj(z)/2 inside the unit disk",
        inside,
        Threshold::AtMost { limit: p.tol_closed_form },
    );
    out.check(
        "disk_closed_form_exterior",
        "cgo_toolkit: P(chi_D) = 1/(2z) outside the unit disk",
        outside,
        Threshold::AtMost { limit: p.tol_closed_form },
    );
    let row = g.n() / 2;
    let rows = (0..g.n()).filter_map(|ix| {
        let i = row * g.n() + ix;
        let (x, y) = g.point(i);
        (x.abs() <= 1.5).then(|| {
            let e = exact(x, y);
            format!("{}, {}, {}, {}, {}, {}", cell(x), cell(y), cell(pchi[i].re), cell(pchi[i].im), cell(e.re), cell(e.im))
        })
    });
    out.artifact("disk_transform.csv", csv("x, y, p_re, p_im, exact_re, exact_im", rows));
    Ok(())
}

fn inverse_properties(p: &Params, g: &SpectralGrid, out: &mut Outcome) -> Result<(), HarnessError> {
    let idx = g.indices_within(1.0);
    let cut = g.sample_real(|x, y| radial_cutoff(x.hypot(y), 1.1, 0.95 * g.l()));
    let apply_cut = |f: Vec<Complex64>| -> Vec<Complex64> { f.iter().zip(&cut).map(|(v, c)| v * c).collect() };
    let mut rows = Vec::new();
    for (name, f) in smooth_fields(g) {
        let dbar_p: Vec<Complex64> = g.dbar(&apply_cut(g.cauchy_p(&f)?)).iter().map(|v| 2.0 * v).collect();
        let d_pbar: Vec<Complex64> = g.d(&apply_cut(g.cauchy_pbar(&f)?)).iter().map(|v| 2.0 * v).collect();
        for (op, v) in [("2dbar_P", &dbar_p), ("2d_Pbar", &d_pbar)] {
            let e = max_diff_on(v, &f, &idx);
            rows.push(format!("{}, {}, {}", quoted(name), quoted(op), cell(e)));
            out.check(
                format!("inverse_{op}:{name}"),
                "cgo_toolkit: the Cauchy transforms invert 2dbar and 2d on smooth fields",
                e,
                Threshold::AtMost { limit: p.tol_inverse },
            );
        }
    }
    for coef in potential_catalog().iter().filter(|c| !matches!(c, ScalarCoefficient::Constant { .. })) {
        let pot = PotentialField::from_coefficient(g, coef)?;
        let d: Vec<Complex64> = g.dbar(&apply_cut(g.cauchy_p(pot.q())?)).iter().map(|v| 2.0 * v).collect();
        let e = max_diff_on(&d, pot.q(), &idx) / pot.sup_norm();
        rows.push(format!("{}, {}, {}", quoted(&coef.label()), quoted("2dbar_P_relative"), cell(e)));
        out.check(
            format!("inverse_2dbar_P_relative:{}", coef.label()),
            "cgo_toolkit: 2dbar P q = q relative to the potential scale",
            e,
            Threshold::AtMost { limit: p.tol_inverse },
        );
    }
    out.artifact("inverse_properties.csv", csv("field, operator, max_error", rows));
    Ok(())
}

fn conjugation(p: &Params, g: &SpectralGrid, out: &mut Outcome) -> Result<(), HarnessError> {
    let mut worst = 0.0f64;
    for (_, f) in smooth_fields(g) {
        let conj: Vec<Complex64> = f.iter().map(|v| v.conj()).collect();
        let pc = g.cauchy_p(&conj)?;
        let pbar = g.cauchy_pbar(&f)?;
        let scale = pbar.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let e = pbar.iter().zip(&pc).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max);
        worst = worst.max(e / scale);
    }
    out.check(
        "conjugation_identity",
        "cgo_toolkit: Pbar f = conj(P conj f)",
        worst,
        Threshold::AtMost { limit: p.tol_conjugation },
    );
    Ok(())
}

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let g = SpectralGrid::new(p.l, p.n)?;
    closed_form(p, &g, out)?;
    inverse_properties(p, &g, out)?;
    conjugation(p, &g, out)
}
