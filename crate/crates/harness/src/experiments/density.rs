//! E5: projection residuals of fixed targets onto gradient-product
//! families, and the Fourier decay of an orthogonalized seed.

use electrothermal::cgo::{DecayProbeOptions, PotentialField, SpectralGrid, DEFAULT_K_SWEEP};
use electrothermal::coefficients::TensorCoefficient;
use electrothermal::density::{
    build_family, orthogonalized_decay, projection_residual, write_residual_table, ResidualRow,
};
use electrothermal::geometry::{Mesh, Point2, ScalarField, TensorField};
use num_complex::Complex64;

use super::{count, mesh, mesh_h, tol};
use crate::catalog::parse_tensor;
use crate::config::Config;
use crate::report::{Outcome, Threshold};
use crate::HarnessError;

pub struct Params {
    pub mesh_h: f64,
    pub m_max: usize,
    pub gamma: TensorCoefficient,
    pub probe_n: usize,
    pub k_sweep: Vec<f64>,
    pub tol_monotone: f64,
    pub tol_member: f64,
    pub tol_quadratic: f64,
    pub tol_certificate: f64,
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        let probe_n = count(cfg, "probe_n", 128, 128, 1024)?;
        if !probe_n.is_power_of_two() {
            return Err(HarnessError::Config(format!("probe_n = {probe_n} must be a power of two")));
        }
        let k_sweep = cfg.list_or("k_sweep", &DEFAULT_K_SWEEP)?;
        if k_sweep.len() < 2 || k_sweep.iter().any(|&k| !(k > 0.0)) {
            return Err(HarnessError::Config("k_sweep needs at least two positive values".into()));
        }
        Ok(Self {
            mesh_h: mesh_h(cfg, "mesh_h", 0.05)?,
            m_max: count(cfg, "m_max", 8, 1, electrothermal::density::MAX_TRACE_ORDER)?,
            gamma: parse_tensor(&cfg.str_or("gamma", "identity"))?,
            probe_n,
            k_sweep,
            tol_monotone: tol(cfg, "tol_monotone", 1e-10)?,
            tol_member: tol(cfg, "tol_member", 1e-6)?,
            tol_quadratic: tol(cfg, "tol_quadratic", 0.05)?,
            tol_certificate: tol(cfg, "tol_certificate", 1e-8)?,
        })
    }
}

/// The fixed target set.
pub fn targets(mesh: &Mesh) -> Vec<(&'static str, ScalarField)> {
    vec![
        ("r2", ScalarField::from_fn(mesh, |p| p.norm_squared())),
        ("x", ScalarField::from_fn(mesh, |p| p.x)),
        ("exp", ScalarField::from_fn(mesh, |p| (p.x - 0.5 * p.y).exp())),
        ("gauss", ScalarField::from_fn(mesh, |p| (-4.0 * (p - Point2::new(0.2, 0.1)).norm_squared()).exp())),
        ("halfdisk", ScalarField::from_fn(mesh, |p| if p.x > 0.0 { 1.0 } else { 0.0 })),
    ]
}

/// Quadratic target whose residual is checked at `M = 8`.
const QUADRATIC_ORDER: usize = 8;

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let mesh = mesh(p.mesh_h)?;
    let gamma = TensorField::from_coefficient(&mesh, &p.gamma);
    let targets = targets(&mesh);
    let mut rows = Vec::new();
    let mut per_target = vec![Vec::with_capacity(p.m_max + 1); targets.len()];
    let mut family = None;
    for m in 0..=p.m_max {
        let fam = build_family(&mesh, &gamma, m)?;
        for ((name, t), res) in targets.iter().zip(per_target.iter_mut()) {
            let r = projection_residual(&mesh, t, &fam)?;
            out.freeze(format!("residual:{name}:M{m:02}"), r);
            rows.push(ResidualRow {
                m,
                target_id: name.to_string(),
                residual: r,
            });
            res.push(r);
        }
        family = Some(fam);
    }
    let fam = family.expect("m_max >= 1");

    let worst_increase = per_target
        .iter()
        .flat_map(|r| r.windows(2).map(|w| w[1] - w[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    out.check(
        "residual_monotone_max_increase",
        "density_probe: residuals are nonincreasing along nested families",
        worst_increase,
        Threshold::AtMost { limit: p.tol_monotone },
    );

    let mut worst_member = 0.0f64;
    for b in fam.products() {
        worst_member = worst_member.max(projection_residual(&mesh, b, &fam)?);
    }
    out.check(
        format!("member_residual_max_M{}", p.m_max),
        "density_probe: family members project with zero residual",
        worst_member,
        Threshold::AtMost { limit: p.tol_member },
    );
    if p.m_max >= QUADRATIC_ORDER {
        out.check(
            format!("residual_r2_M{QUADRATIC_ORDER}"),
            "density_probe: r^2 is well approximated by the M = 8 family",
            per_target[0][QUADRATIC_ORDER],
            Threshold::AtMost {
                limit: p.tol_quadratic,
            },
        );
    }

    let grid = SpectralGrid::new(2.0, p.probe_n)?;
    let pot = PotentialField::zero(&grid);
    let ks: Vec<Complex64> = p.k_sweep.iter().map(|&k| Complex64::new(0.6 * k, 0.8 * k)).collect();
    let opts = DecayProbeOptions {
        direct_only: true,
        ..Default::default()
    };
    let seed = &targets[4].1;
    let decay = orthogonalized_decay(&mesh, &fam, seed, &grid, &pot, &ks, &opts)?;
    out.check(
        "orthogonality_defect",
        "density_probe: the orthogonalized seed is orthogonal to every product",
        decay.orthogonality_defect,
        Threshold::AtMost {
            limit: p.tol_certificate,
        },
    );
    out.check(
        "orthogonalized_norm_ratio",
        "density_probe: projection does not increase the norm",
        decay.norm_ratio,
        Threshold::Range { lower: 0.0, upper: 1.0 },
    );
    out.freeze("norm_ratio", decay.norm_ratio);
    out.freeze("seed_decay_exponent", decay.seed.decay_exponent);
    let mut decay_csv = Vec::new();
    decay.seed.write_csv(&mut decay_csv)?;
    out.artifact("decay_seed.csv", decay_csv);
    if let (Some(orth), Some(gap)) = (&decay.orthogonalized, decay.exponent_gap) {
        out.freeze("exponent_gap", gap);
        let mut orth_csv = Vec::new();
        orth.write_csv(&mut orth_csv)?;
        out.artifact("decay_orthogonalized.csv", orth_csv);
    }

    let mut table = Vec::new();
    write_residual_table(&mut table, &rows)?;
    out.artifact("residuals.csv", table);
    Ok(())
}
