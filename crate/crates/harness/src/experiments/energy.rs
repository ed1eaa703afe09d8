//! E2: the long-time static heat flow returns the Dirichlet energy.

use std::f64::consts::PI;
use std::time::Instant;

use electrothermal::coefficients::{ScalarCoefficient, TensorCoefficient};
use electrothermal::elliptic::{energy_form, harmonic_trace, solve_conductivity, BoundaryData};
use electrothermal::geometry::CoefficientTriple;
use electrothermal::measurement::recover_energy_static;

use super::{csv, mesh, mesh_h, tol};
use crate::catalog::{parse_scalar, parse_tensor};
use crate::config::{in_range, Config};
use crate::report::{cell, quoted, Outcome, Threshold};
use crate::HarnessError;

pub struct Params {
    pub mesh_h: f64,
    pub gamma: TensorCoefficient,
    pub kappa: ScalarCoefficient,
    pub thermal: TensorCoefficient,
    pub recovery_tol: f64,
    pub tol_energy: f64,
    pub max_runtime_s: f64,
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        Ok(Self {
            mesh_h: mesh_h(cfg, "mesh_h", 0.05)?,
            gamma: parse_tensor(&cfg.str_or("gamma", "radial:1,0.5"))?,
            kappa: parse_scalar(&cfg.str_or("kappa", "exp:0.4"))?,
            thermal: parse_tensor(&cfg.str_or("thermal", "const:1.2,0.2,0.9"))?,
            recovery_tol: in_range("recovery_tol", cfg.parse_or("recovery_tol", 1e-8)?, 1e-14, 1e-2)?,
            tol_energy: tol(cfg, "tol_energy", 0.02)?,
            max_runtime_s: tol(cfg, "max_runtime_s", 60.0)?,
        })
    }
}

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let start = Instant::now();
    let mesh = mesh(p.mesh_h)?;
    let unit = CoefficientTriple::unit(&mesh);
    let x = BoundaryData::from_fn(&mesh, "x", |q| q.x)?;
    let re_z2 = harmonic_trace(&mesh, 2);
    let catalog = CoefficientTriple::from_catalog(&mesh, &p.gamma, &p.kappa, &p.thermal);
    let mixed = BoundaryData::from_fn(&mesh, "x-0.5xy", |q| q.x - 0.5 * q.x * q.y)?;
    let u = solve_conductivity(&mesh, &catalog.gamma, &mixed)?;
    let cases = [
        ("energy_identity_f=x", &unit, &x, PI),
        ("energy_identity_f=re_z2", &unit, &re_z2, 2.0 * PI),
        ("energy_identity_catalog", &catalog, &mixed, energy_form(&mesh, &u)),
    ];
    let mut rows = Vec::new();
    for (name, triple, f, reference) in cases {
        let r = recover_energy_static(&mesh, triple, f, p.recovery_tol)?;
        rows.push(format!(
            "{}, {}, {}, {}, {}, {}, {}",
            quoted(name),
            quoted(&triple.label),
            cell(reference),
            cell(r.energy),
            cell(r.limit),
            cell(r.t_star),
            cell(r.lambda1)
        ));
        out.check(
            name,
            "measurement: recovered static energy equals the energy form",
            r.energy,
            Threshold::Relative {
                reference,
                tolerance: p.tol_energy,
            },
        );
    }
    out.artifact(
        "energy.csv",
        csv("case, triple_id, reference, recovered, steady_limit, t_star, lambda1", rows),
    );
    out.check(
        "runtime_s",
        "measurement: static energy recovery runs within its time budget",
        start.elapsed().as_secs_f64(),
        Threshold::AtMost { limit: p.max_runtime_s },
    );
    Ok(())
}
