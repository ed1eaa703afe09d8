//! E1: `Σ_{triple}` and `Σ_{F_*triple}` agree for boundary-fixing `F`.

use std::sync::Arc;

use electrothermal::coefficients::{ScalarCoefficient, TensorCoefficient};
use electrothermal::elliptic::BoundaryData;
use electrothermal::geometry::{pushforward_triple, CoefficientTriple, Mesh};
use electrothermal::measurement::{ExcitationSchedule, HeatMethod, TimeProfile, VoltageToHeatFlow};

use super::{count, csv, mesh, mesh_h, tol};
use crate::catalog::{parse_diffeos, parse_scalar, parse_tensor, NamedDiffeo};
use crate::config::{in_range, Config};
use crate::report::{cell, quoted, Outcome, Threshold};
use crate::HarnessError;

pub struct Params {
    pub mesh_h: f64,
    pub gamma: TensorCoefficient,
    pub kappa: ScalarCoefficient,
    pub thermal: TensorCoefficient,
    pub diffeos: Vec<NamedDiffeo>,
    pub t_final: f64,
    pub dt: f64,
    pub method: HeatMethod,
    pub tol_gauge: f64,
}

pub(crate) fn heat_method(cfg: &Config) -> Result<HeatMethod, HarnessError> {
    let modes = count(cfg, "heat_modes", electrothermal::heat::DEFAULT_MODES, 1, 1024)?;
    match cfg.str_or("heat_method", "crank_nicolson").as_str() {
        "crank_nicolson" => Ok(HeatMethod::Timestep { theta: 0.5 }),
        "backward_euler" => Ok(HeatMethod::Timestep { theta: 1.0 }),
        "eigen" => Ok(HeatMethod::Eigen { modes }),
        other => Err(HarnessError::Config(format!(
            "heat_method '{other}' is not one of crank_nicolson, backward_euler, eigen"
        ))),
    }
}

impl Params {
    pub fn from_config(cfg: &Config) -> Result<Self, HarnessError> {
        let seed: u64 = cfg.parse_or("seed", 20240611)?;
        let t_final = in_range("t_final", cfg.parse_or("t_final", 0.05)?, 1e-4, 10.0)?;
        let dt = in_range("dt", cfg.parse_or("dt", 1e-3)?, 1e-6, t_final)?;
        Ok(Self {
            mesh_h: mesh_h(cfg, "mesh_h", 0.05)?,
            gamma: parse_tensor(&cfg.str_or("gamma", "radial:1,0.5"))?,
            kappa: parse_scalar(&cfg.str_or("kappa", "exp:0.3"))?,
            thermal: parse_tensor(&cfg.str_or("thermal", "twisted:1.5,0.8,0.25"))?,
            diffeos: parse_diffeos(&cfg.str_or("diffeo", "random:3"), seed)?,
            t_final,
            dt,
            method: heat_method(cfg)?,
            tol_gauge: tol(cfg, "tol_gauge", 0.05)?,
        })
    }
}

/// The five excitation schedules of the gauge study.
pub fn schedules(mesh: &Mesh) -> Result<Vec<ExcitationSchedule>, HarnessError> {
    Ok(vec![
        ExcitationSchedule::fixed(BoundaryData::trigonometric(mesh, 1, false)),
        ExcitationSchedule::new(BoundaryData::trigonometric(mesh, 1, true), TimeProfile::Ramp { tau: 0.02 }),
        ExcitationSchedule::new(
            BoundaryData::trigonometric(mesh, 2, false),
            TimeProfile::Harmonic { omega: 30.0, offset: 1.0 },
        ),
        ExcitationSchedule::fixed(BoundaryData::trigonometric(mesh, 3, true)),
        ExcitationSchedule::new(
            BoundaryData::from_fn(mesh, "x+y^2", |p| p.x + p.y * p.y)?,
            TimeProfile::Ramp { tau: 0.05 },
        ),
    ])
}

pub fn run(p: &Params, out: &mut Outcome) -> Result<(), HarnessError> {
    let mesh = Arc::new(mesh(p.mesh_h)?);
    let triple = CoefficientTriple::from_catalog(&mesh, &p.gamma, &p.kappa, &p.thermal);
    let map = VoltageToHeatFlow::new(mesh.clone(), p.method);
    let scheds = schedules(&mesh)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut references = Vec::with_capacity(scheds.len());
    for s in &scheds {
        references.push(map.measure(&triple, s, p.t_final, p.dt)?);
    }
    let mut reference_csv = Vec::new();
    references[0].write_csv(&mut reference_csv)?;
    for d in &p.diffeos {
        let pushed = pushforward_triple(&mesh, &triple, &d.map)?;
        for (s, reference) in scheds.iter().zip(&references) {
            let rec = map.measure(&pushed, s, p.t_final, p.dt)?;
            let disc = reference.relative_distance(&rec);
            worst = worst.max(disc);
            rows.push(format!("{}, {}, {}", quoted(&d.label), quoted(&s.label()), cell(disc)));
        }
    }
    out.artifact("gauge.csv", csv("diffeo_id, schedule_id, relative_l2_discrepancy", rows));
    out.artifact("flux_reference.csv", reference_csv);
    out.check(
        "gauge_max_discrepancy",
        "measurement: Σ is invariant under pushforward by boundary-fixing diffeomorphisms",
        worst,
        Threshold::AtMost { limit: p.tol_gauge },
    );
    Ok(())
}
