//! The voltage-to-heat-flow map, static energy recovery and separable
//! sources.
//!
//! A boundary voltage `h(x)g(t)` drives `u = u₀(x)g(t)`, so the Joule
//! source is `(∇u₀·γ∇u₀)·g(t)²`. Sources injected directly (density and
//! uniqueness experiments) use their time profile verbatim.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::elliptic::{energy_density, BoundaryData, ConductivityProblem, VoltageField};
use crate::error::{Error, Result};
use crate::geometry::{CoefficientTriple, Mesh, TensorField};
use crate::heat::{
    boundary_heat_flux, eigen_from_operator, solve_transient_eigen, solve_transient_timestep,
    FluxHistory, HeatOperator, SourceHistory, TimeGrid, DEFAULT_MODES,
};

/// Time profile `g(t)` of a separable excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `g ≡ 1`.
    Static,
    /// `1 − e^{−t/τ}`
    Ramp { tau: f64 },
    /// `offset + sin(ωt)`
    Harmonic { omega: f64, offset: f64 },
    /// Values on the consuming time grid.
    Tabulated { values: Vec<f64> },
}

impl TimeProfile {
    pub fn sample(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        let t = grid.times();
        Ok(match self {
            Self::Static => vec![1.0; t.len()],
            Self::Ramp { tau } => t.iter().map(|t| -(-t / tau).exp_m1()).collect(),
            Self::Harmonic { omega, offset } => t.iter().map(|t| offset + (omega * t).sin()).collect(),
            Self::Tabulated { values } => {
                if values.len() != t.len() {
                    return Err(Error::Parameter(format!(
                        "tabulated profile has {} samples for {} grid times",
                        values.len(),
                        t.len()
                    )));
                }
                values.clone()
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Static => "static".into(),
            Self::Ramp { tau } => format!("ramp(tau={tau})"),
            Self::Harmonic { omega, offset } => format!("harmonic(omega={omega},offset={offset})"),
            Self::Tabulated { values } => format!("tabulated({})", values.len()),
        }
    }
}

/// Boundary voltage `f(x, t) = h(x)·g(t)`.
#[derive(Debug, Clone)]
pub struct ExcitationSchedule {
    pub h: BoundaryData,
    pub g: TimeProfile,
}

impl ExcitationSchedule {
    pub fn new(h: BoundaryData, g: TimeProfile) -> Self {
        Self { h, g }
    }

    pub fn fixed(h: BoundaryData) -> Self {
        Self::new(h, TimeProfile::Static)
    }

    pub fn is_static(&self) -> bool {
        self.g == TimeProfile::Static
    }

    pub fn label(&self) -> String {
        format!("{}*{}", self.h.label, self.g.label())
    }
}

/// How the heat equation is integrated in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatMethod {
    Eigen { modes: usize },
    Timestep { theta: f64 },
}

impl Default for HeatMethod {
    fn default() -> Self {
        Self::Timestep { theta: 0.5 }
    }
}

/// Grid and provenance metadata written next to a flux CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub triple_id: String,
    pub schedule_id: String,
    pub method: HeatMethod,
    pub dt: f64,
    pub n_steps: usize,
    pub t_final: f64,
    pub n_nodes: usize,
    pub n_boundary_nodes: usize,
    pub h_target: f64,
    pub warning: Option<String>,
}

/// Output of the voltage-to-heat-flow map.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub metadata: RecordMetadata,
    pub flux: FluxHistory,
}

impl MeasurementRecord {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        self.flux.write_csv(w)
    }

    pub fn sidecar_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.metadata).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn relative_distance(&self, other: &MeasurementRecord) -> f64 {
        self.flux.relative_l2_distance(&other.flux)
    }
}

fn hash_inputs(gamma: &TensorField, h: &BoundaryData) -> u64 {
    let mut s = DefaultHasher::new();
    for m in gamma.values() {
        for v in m.iter() {
            v.to_bits().hash(&mut s);
        }
    }
    for v in h.values() {
        v.to_bits().hash(&mut s);
    }
    s.finish()
}

/// Pipeline for `Σ_{γ,κ,A}` on one mesh, caching elliptic solves by the
/// bit pattern of `(γ, h)`.
#[derive(Debug)]
pub struct VoltageToHeatFlow {
    mesh: Arc<Mesh>,
    method: HeatMethod,
    cache: RwLock<HashMap<u64, Arc<VoltageField>>>,
}

impl VoltageToHeatFlow {
    pub fn new(mesh: Arc<Mesh>, method: HeatMethod) -> Self {
        Self {
            mesh,
            method,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn cached_solves(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    pub fn voltage(&self, gamma: &TensorField, h: &BoundaryData) -> Result<Arc<VoltageField>> {
        let key = hash_inputs(gamma, h);
        if let Some(u) = self.cache.read().ok().and_then(|c| c.get(&key).cloned()) {
            return Ok(u);
        }
        let u = Arc::new(ConductivityProblem::new(&self.mesh, gamma)?.solve(&self.mesh, h)?);
        if let Ok(mut c) = self.cache.write() {
            c.entry(key).or_insert_with(|| u.clone());
        }
        Ok(u)
    }

    /// Joule source for a boundary-driven schedule (`g²` coupling).
    pub fn source(&self, triple: &CoefficientTriple, sched: &ExcitationSchedule, grid: &TimeGrid) -> Result<SourceHistory> {
        let u = self.voltage(&triple.gamma, &sched.h)?;
        let w = energy_density(&self.mesh, &u);
        if sched.is_static() {
            return Ok(SourceHistory::Static(w));
        }
        let g = sched.g.sample(grid)?;
        Ok(SourceHistory::Separable {
            w,
            g: g.iter().map(|v| v * v).collect(),
        })
    }

    pub fn measure(
        &self,
        triple: &CoefficientTriple,
        sched: &ExcitationSchedule,
        t_final: f64,
        dt: f64,
    ) -> Result<MeasurementRecord> {
        let grid = TimeGrid::uniform(t_final, dt)?;
        let source = self.source(triple, sched, &grid)?;
        self.measure_source(triple, &source, &sched.label(), &grid)
    }

    /// Runs the heat stage for an injected source.
    pub fn measure_source(
        &self,
        triple: &CoefficientTriple,
        source: &SourceHistory,
        schedule_id: &str,
        grid: &TimeGrid,
    ) -> Result<MeasurementRecord> {
        let mesh = &*self.mesh;
        triple.validate(mesh)?;
        let op = Arc::new(HeatOperator::new(mesh, &triple.kappa, &triple.thermal)?);
        let psi = match self.method {
            HeatMethod::Eigen { modes } => {
                let eig = eigen_from_operator(op.clone(), modes.min(op.n_interior()))?;
                solve_transient_eigen(mesh, &eig, source, grid)?
            }
            HeatMethod::Timestep { theta } => solve_transient_timestep(mesh, &op, source, grid, theta)?,
        };
        let flux = boundary_heat_flux(mesh, &op, &psi, source)?;
        Ok(MeasurementRecord {
            metadata: RecordMetadata {
                triple_id: triple.label.clone(),
                schedule_id: schedule_id.to_string(),
                method: self.method,
                dt: grid.dt,
                n_steps: grid.n_steps,
                t_final: grid.t_final(),
                n_nodes: mesh.n_nodes(),
                n_boundary_nodes: mesh.boundary_nodes().len(),
                h_target: mesh.h_target(),
                warning: psi.warning.clone(),
            },
            flux,
        })
    }
}

pub fn voltage_to_heat_flow(
    mesh: Arc<Mesh>,
    triple: &CoefficientTriple,
    sched: &ExcitationSchedule,
    t_final: f64,
    dt: f64,
) -> Result<MeasurementRecord> {
    VoltageToHeatFlow::new(mesh, HeatMethod::default()).measure(triple, sched, t_final, dt)
}

/// `S = (∇u₀·γ∇u₀)·g²` for boundary data `h·g`.
pub fn separable_source(
    mesh: &Mesh,
    gamma: &TensorField,
    h: &BoundaryData,
    g: &TimeProfile,
    grid: &TimeGrid,
) -> Result<SourceHistory> {
    let u = ConductivityProblem::new(mesh, gamma)?.solve(mesh, h)?;
    let w = energy_density(mesh, &u);
    if *g == TimeProfile::Static {
        return Ok(SourceHistory::Static(w));
    }
    let g = g.sample(grid)?;
    Ok(SourceHistory::Separable {
        w,
        g: g.iter().map(|v| v * v).collect(),
    })
}

/// Energy read off the long-time boundary heat flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecovery {
    /// `−∫_{∂Ω} flux(T*) dS`.
    pub energy: f64,
    /// First check time at which the integrated flux stabilized.
    pub t_star: f64,
    /// `−∫_{∂Ω} flux dS` of the exact steady state.
    pub limit: f64,
    pub lambda1: f64,
}

/// Default cap on `T*` in units of `1/λ₁`.
pub const RECOVERY_CAP: f64 = 50.0;

/// Static-input energy recovery from the heat flow.
///
/// The integrated flux is evaluated on the modal solution at `t_j = j/(4λ₁)`
/// until two successive values differ by less than `tol` relative.
pub fn recover_energy_static(
    mesh: &Mesh,
    triple: &CoefficientTriple,
    f: &BoundaryData,
    tol: f64,
) -> Result<EnergyRecovery> {
    triple.validate(mesh)?;
    let u = ConductivityProblem::new(mesh, &triple.gamma)?.solve(mesh, f)?;
    let s = energy_density(mesh, &u);
    let op = Arc::new(HeatOperator::new(mesh, &triple.kappa, &triple.thermal)?);
    let eig = eigen_from_operator(op.clone(), DEFAULT_MODES.min(op.n_interior()))?;
    let lambda1 = eig.values[0];

    let psi0 = op.static_solution(s.values());
    let limit_flux: f64 = op.boundary_residual(mesh, &psi0, None, s.values()).iter().sum();
    let psi0_i = op.dofs.restrict(&psi0);
    let m_psi0 = op.m_ii.mul_vec(&psi0_i);
    let zero = vec![0.0; mesh.n_nodes()];
    // Boundary flux carried by each decaying mode aᵢe^{−λᵢt}φᵢ.
    let modal: Vec<(f64, f64, f64)> = eig
        .vectors
        .iter()
        .zip(&eig.values)
        .map(|(phi, &lam)| {
            let a = -crate::linalg::sparse::dot(phi, &m_psi0);
            let full = op.dofs.extend_zero(phi);
            let dot: Vec<f64> = full.iter().map(|v| -lam * v).collect();
            let r: f64 = op.boundary_residual(mesh, &full, Some(&dot), &zero).iter().sum();
            (a, lam, r)
        })
        .collect();
    let integrated = |t: f64| -> f64 {
        limit_flux + modal.iter().map(|(a, lam, r)| a * (-lam * t).exp() * r).sum::<f64>()
    };

    let step = 0.25 / lambda1;
    let cap = RECOVERY_CAP / lambda1;
    let mut prev = integrated(0.0);
    let mut t = 0.0;
    loop {
        t += step;
        if t > cap {
            return Err(Error::Convergence(format!(
                "integrated flux not stable to {tol:e} before t = {cap:.4} (50/lambda1)"
            )));
        }
        let cur = integrated(t);
        if (cur - prev).abs() <= tol * cur.abs() {
            return Ok(EnergyRecovery {
                energy: -cur,
                t_star: t,
                limit: -limit_flux,
                lambda1,
            });
        }
        prev = cur;
    }
}



#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_disk_mesh;

    #[test]
    fn zero_voltage_gives_zero_flux() {
        let mesh = Arc::new(build_disk_mesh(0.2).unwrap());
        let triple = CoefficientTriple::unit(&mesh);
        let sched = ExcitationSchedule::new(BoundaryData::constant(&mesh, 0.0), TimeProfile::Ramp { tau: 0.05 });
        let rec = voltage_to_heat_flow(mesh, &triple, &sched, 0.05, 0.01).unwrap();
        assert!(rec.flux.traces.iter().flat_map(|t| &t.values).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_voltage_recovers_zero_energy() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let triple = CoefficientTriple::unit(&mesh);
        let r = recover_energy_static(&mesh, &triple, &BoundaryData::constant(&mesh, 2.0), 1e-8).unwrap();
        assert!(r.energy.abs() < 1e-12 && r.limit.abs() < 1e-12);
    }

    #[test]
    fn separable_source_for_linear_data() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let h = BoundaryData::from_fn(&mesh, "x", |p| p.x).unwrap();
        let grid = TimeGrid::new(0.01, 4).unwrap();
        let id = TensorField::identity(&mesh);
        match separable_source(&mesh, &id, &h, &TimeProfile::Static, &grid).unwrap() {
            SourceHistory::Static(w) => assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-12)),
            other => panic!("expected a static source, got {other:?}"),
        }
        let g = TimeProfile::Harmonic { omega: 3.0, offset: 0.5 };
        match separable_source(&mesh, &id, &h, &g, &grid).unwrap() {
            SourceHistory::Separable { g: g2, .. } => {
                let raw = g.sample(&grid).unwrap();
                for (a, b) in g2.iter().zip(raw) {
                    assert_eq!(*a, b * b);
                }
            }
            other => panic!("expected a separable source, got {other:?}"),
        }
    }

    #[test]
    fn cache_reuses_elliptic_solves() {
        let mesh = Arc::new(build_disk_mesh(0.3).unwrap());
        let map = VoltageToHeatFlow::new(mesh.clone(), HeatMethod::default());
        let triple = CoefficientTriple::unit(&mesh);
        let h = BoundaryData::from_fn(&mesh, "x", |p| p.x).unwrap();
        for g in [TimeProfile::Static, TimeProfile::Ramp { tau: 0.1 }] {
            map.measure(&triple, &ExcitationSchedule::new(h.clone(), g), 0.02, 0.01).unwrap();
        }
        assert_eq!(map.cached_solves(), 1);
    }
}
