//! E3: weighted spectrum, modal vs θ-scheme agreement, static flux oracles.

use std::sync::Arc;

use electrothermal::coefficients::{ScalarCoefficient, TensorCoefficient};
use electrothermal::elliptic::{energy_density, solve_conductivity, BoundaryData};
use electrothermal::geometry::{Mesh, ScalarField, TensorField};
use electrothermal::heat::{
    assemble_weighted_eigen, boundary_heat_flux_static, eigen_from_operator, solve_static_heat,
    solve_transient_eigen, solve_transient_timestep, HeatOperator, SourceHistory, TimeGrid,
};
use electrothermal::special::J0_FIRST_ZERO;

use super::{count, csv, mesh, mesh_h, tol};
use crate::catalog::{parse_scalar, parse_tensor};
use crate::config::{in_range, Config};
use crate::report::{cell, quoted, Outcome, Threshold};
use crate::HarnessError;

pub struct Params {
    pub mesh_h: f64,
    pub spectrum_h: f64,
    pub n_eigenvalues: usize,
    pub gamma: TensorCoefficient,
    pub kappa: ScalarCoefficient,
    pub thermal: TensorCoefficient,
    pub t_final: f64,
    pub dt: f64,
    pub heat_modes: usize,
    pub tol_lambda1: f64,
    pub tol_kappa_scaling: f64,
    pub tol_crossval: f64,
    pub tol_flux: f64,
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        let t_final = in_range("t_final", cfg.parse_or("t_final", 0.1)?, 1e-4, 10.0)?;
        Ok(Self {
            mesh_h: mesh_h(cfg, "mesh_h", 0.05)?,
            spectrum_h: mesh_h(cfg, "spectrum_h", 0.025)?,
            n_eigenvalues: count(cfg, "n_eigenvalues", 12, 1, 256)?,
            gamma: parse_tensor(&cfg.str_or("gamma", "iso:squared_quadratic:0.5,0"))?,
            kappa: parse_scalar(&cfg.str_or("kappa", "exp:0.3"))?,
            thermal: parse_tensor(&cfg.str_or("thermal", "const:1.2,0.1,0.9"))?,
            t_final,
            dt: in_range("dt", cfg.parse_or("dt", 1e-3)?, 1e-6, t_final)?,
            heat_modes: count(cfg, "heat_modes", 64, 1, 1024)?,
            tol_lambda1: tol(cfg, "tol_lambda1", 0.01)?,
            tol_kappa_scaling: tol(cfg, "tol_kappa_scaling", 1e-8)?,
            tol_crossval: tol(cfg, "tol_crossval", 1e-3)?,
            tol_flux: tol(cfg, "tol_flux", 0.01)?,
        })
    }
}

fn unit_operator(mesh: &Mesh) -> Result<Arc<HeatOperator>, HarnessError> {
    Ok(Arc::new(HeatOperator::new(
        mesh,
        &ScalarField::constant(mesh, 1.0),
        &TensorField::identity(mesh),
    )?))
}

/// `‖a − b‖_M / ‖b‖_M` in the unit mass matrix.
fn rel_l2(op: &HeatOperator, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (op.unit_mass.bilinear(&d, &d) / op.unit_mass.bilinear(b, b)).sqrt()
}

fn spectrum(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let fine = mesh(p.spectrum_h)?;
    let eig = eigen_from_operator(unit_operator(&fine)?, p.n_eigenvalues)?;
    let exact = J0_FIRST_ZERO * J0_FIRST_ZERO;
    out.check(
        "lambda1_unit_disk",
        "heat_solver: first weighted eigenvalue converges to j01^2",
        eig.values[0],
        Threshold::Relative {
            reference: exact,
            tolerance: p.tol_lambda1,
        },
    );

    let m = mesh(p.mesh_h)?;
    let kappa = ScalarField::from_coefficient(&m, &p.kappa);
    let thermal = TensorField::from_coefficient(&m, &p.thermal);
    let a = assemble_weighted_eigen(&m, &kappa, &thermal, p.n_eigenvalues)?;
    let b = assemble_weighted_eigen(&m, &kappa.scaled(2.0), &thermal, p.n_eigenvalues)?;
    let worst = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (y - 2.0 * x).abs() / (2.0 * x))
        .fold(0.0, f64::max);
    out.check(
        "kappa_doubling_max_rel_error",
        "heat_solver: doubling kappa doubles every eigenvalue",
        worst,
        Threshold::AtMost {
            limit: p.tol_kappa_scaling,
        },
    );
    let rows = (0..p.n_eigenvalues).map(|i| {
        let unit = eig.values.get(i).copied().unwrap_or(f64::NAN);
        format!("{}, {}, {}, {}", i + 1, cell(unit), cell(a.values[i]), cell(b.values[i]))
    });
    out.artifact(
        "spectrum.csv",
        csv("index, lambda_unit_fine, lambda_catalog, lambda_catalog_doubled_kappa", rows),
    );
    Ok(())
}

fn cross_validation(p: &Params, m: &Mesh, joule: &ScalarField, out: &mut Outcome) -> Result<(), HarnessError> {
    let op = unit_operator(m)?;
    let eig = eigen_from_operator(op.clone(), p.heat_modes.min(op.n_interior()))?;
    let grid = TimeGrid::uniform(p.t_final, p.dt)?;
    let mut rows = Vec::new();
    for (name, s) in [("constant", ScalarField::constant(m, 1.0)), ("joule", joule.clone())] {
        let src = SourceHistory::Static(s);
        let modal = solve_transient_eigen(m, &eig, &src, &grid)?;
        let cn = solve_transient_timestep(m, &op, &src, &grid, 0.5)?;
        let d = rel_l2(&op, cn.last(), modal.last());
        rows.push(format!("{}, {}, {}, {}", quoted(name), cell(grid.t_final()), eig.n_modes(), cell(d)));
        out.check(
            format!("eigen_vs_cn_{name}"),
            "heat_solver: modal and Crank-Nicolson temperatures agree at T_final",
            d,
            Threshold::AtMost { limit: p.tol_crossval },
        );
    }
    out.artifact("crossval.csv", csv("source, t_final, modes, relative_l2", rows));
    Ok(())
}

fn static_oracles(p: &Params, m: &Mesh, joule: &ScalarField, out: &mut Outcome) -> Result<(), HarnessError> {
    let one = ScalarField::constant(m, 1.0);
    let op = unit_operator(m)?;
    let psi = solve_static_heat(m, &TensorField::identity(m), &one)?;
    let flux = boundary_heat_flux_static(m, &op, &psi, one.values());
    let worst = flux.values.iter().map(|v| (v + 0.5).abs() / 0.5).fold(0.0, f64::max);
    out.check(
        "static_flux_unit_source",
        "heat_solver: psi0 = (1-r^2)/4 has boundary flux -1/2",
        worst,
        Threshold::AtMost { limit: p.tol_flux },
    );
    let rows: Vec<String> = flux
        .nodes
        .iter()
        .zip(&flux.values)
        .map(|(n, v)| format!("{n}, {}", cell(*v)))
        .collect();
    out.artifact("static_flux.csv", csv("node_index, flux", rows));

    let kappa = ScalarField::from_coefficient(m, &p.kappa);
    let thermal = TensorField::from_coefficient(m, &p.thermal);
    let catalog_op = HeatOperator::new(m, &kappa, &thermal)?;
    let mut rows = Vec::new();
    for (name, o, s) in [("unit", &*op, &one), ("joule", &catalog_op, joule)] {
        let psi = o.static_solution(s.values());
        let total = boundary_heat_flux_static(m, o, &psi, s.values()).integrate();
        let source = s.integrate(m);
        rows.push(format!("{}, {}, {}", quoted(name), cell(total), cell(source)));
        out.check(
            format!("static_sum_rule_{name}"),
            "heat_solver: static boundary flux integrates to minus the source",
            total,
            Threshold::Relative {
                reference: -source,
                tolerance: p.tol_flux,
            },
        );
    }
    out.artifact("sum_rules.csv", csv("source, flux_integral, source_integral", rows));
    Ok(())
}

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    spectrum(p, out)?;
    let m = mesh(p.mesh_h)?;
    let gamma = TensorField::from_coefficient(&m, &p.gamma);
    let f = BoundaryData::from_fn(&m, "x+0.5xy", |q| q.x + 0.5 * q.x * q.y)?;
    let joule = energy_density(&m, &solve_conductivity(&m, &gamma, &f)?);
    cross_validation(p, &m, &joule, out)?;
    static_oracles(p, &m, &joule, out)
}
