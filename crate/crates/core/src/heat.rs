//! Heat equation `κ⁻¹∂ₜψ = ∇·(A∇ψ) + S`, `ψ(0) = 0`, `ψ = 0` on the boundary.
//!
//! Two independent discretizations in time share one spatial operator:
//! the weighted eigen-expansion (exact in time) and the θ-scheme.

use std::io::Write;
use std::sync::Arc;

use crate::elliptic::FluxTrace;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, inverse_kappa_weights, DofMap};
use crate::geometry::{Mesh, ScalarField, TensorField};
use crate::linalg::sparse::dot;
use crate::linalg::{smallest_eigenpairs, CsrMatrix, EnvelopeCholesky, SubMatrix};

pub const DEFAULT_MODES: usize = 64;
/// Relative residual target handed to the eigensolver.
pub const EIGEN_TOL: f64 = 1e-9;
/// Relative truncation level above which a modal solution carries a warning.
pub const TRUNCATION_TOL: f64 = 1e-4;

/// Uniform grid `t_j = j·dt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Parameter(format!("time step {dt} must be positive")));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid reaching `t_final` with step close to `dt`.
    pub fn uniform(t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final > 0.0) || !(dt > 0.0) {
            return Err(Error::Parameter(format!(
                "t_final = {t_final} and dt = {dt} must be positive"
            )));
        }
        let n = (t_final / dt).round().max(1.0) as usize;
        Self::new(t_final / n as f64, n)
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.n_steps)
    }
}

/// Heat source `S(x, t)`.
#[derive(Debug, Clone)]
pub enum SourceHistory {
    Static(ScalarField),
    /// `w(x)·g(t)` with `g` tabulated on the time grid.
    Separable { w: ScalarField, g: Vec<f64> },
    /// One nodal field per grid time.
    General(Vec<ScalarField>),
}

impl SourceHistory {
    pub fn check(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        match self {
            Self::Static(w) => w.check_len(mesh),
            Self::Separable { w, g } => {
                w.check_len(mesh)?;
                if g.len() != grid.len() {
                    return Err(Error::Parameter(format!(
                        "time profile has {} samples for {} grid times",
                        g.len(),
                        grid.len()
                    )));
                }
                Ok(())
            }
            Self::General(fs) => {
                if fs.len() != grid.len() {
                    return Err(Error::Parameter(format!(
                        "source history has {} fields for {} grid times",
                        fs.len(),
                        grid.len()
                    )));
                }
                fs.iter().try_for_each(|f| f.check_len(mesh))
            }
        }
    }

    /// Nodal source at grid time `j`.
    pub fn at(&self, j: usize) -> Vec<f64> {
        match self {
            Self::Static(w) => w.values().to_vec(),
            Self::Separable { w, g } => w.values().iter().map(|v| v * g[j]).collect(),
            Self::General(fs) => fs[j].values().to_vec(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Static(w) => Self::Static(w.scaled(s)),
            Self::Separable { w, g } => Self::Separable {
                w: w.scaled(s),
                g: g.clone(),
            },
            Self::General(fs) => Self::General(fs.iter().map(|f| f.scaled(s)).collect()),
        }
    }
}

/// Spatial operator: `A`-stiffness, `κ⁻¹`-weighted mass and unit mass.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    pub dofs: DofMap,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub unit_mass: CsrMatrix,
    pub k_ii: SubMatrix,
    pub m_ii: SubMatrix,
    k_factor: EnvelopeCholesky,
}

impl HeatOperator {
    pub fn new(mesh: &Mesh, kappa: &ScalarField, thermal: &TensorField) -> Result<Self> {
        kappa.check_positive(mesh)?;
        thermal.check_spd(mesh, f64::MIN_POSITIVE)?;
        let dofs = DofMap::new(mesh);
        let stiffness = assemble_stiffness(mesh, thermal);
        let w = inverse_kappa_weights(mesh, kappa);
        let mass = assemble_mass(mesh, Some(&w));
        let unit_mass = assemble_mass(mesh, None);
        let k_ii = stiffness.submatrix(&dofs.interior, &dofs.interior);
        let m_ii = mass.submatrix(&dofs.interior, &dofs.interior);
        let k_factor = EnvelopeCholesky::factor(&k_ii)?;
        Ok(Self {
            dofs,
            stiffness,
            mass,
            unit_mass,
            k_ii,
            m_ii,
            k_factor,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.dofs.n_interior()
    }

    /// Interior load `(M₁ s)_I`.
    pub fn load(&self, s: &[f64]) -> Vec<f64> {
        let full = self.unit_mass.mul_vec(s);
        self.dofs.restrict(&full)
    }

    /// Nodal `ψ₀` with `K ψ₀ = M₁ s` in the interior and zero boundary values.
    pub fn static_solution(&self, s: &[f64]) -> Vec<f64> {
        let psi = self.k_factor.solve(&self.load(s));
        self.dofs.extend_zero(&psi)
    }

    /// Boundary residual `(Kψ + M ψ̇ − M₁ s)` in loop order.
    pub fn boundary_residual(&self, mesh: &Mesh, psi: &[f64], psi_dot: Option<&[f64]>, s: &[f64]) -> Vec<f64> {
        mesh.boundary_nodes()
            .iter()
            .map(|&b| {
                let mut r: f64 = self.stiffness.row(b).map(|(j, v)| v * psi[j]).sum();
                if let Some(d) = psi_dot {
                    r += self.mass.row(b).map(|(j, v)| v * d[j]).sum::<f64>();
                }
                r - self.unit_mass.row(b).map(|(j, v)| v * s[j]).sum::<f64>()
            })
            .collect()
    }
}

/// Eigenpairs of `Kφ = λMφ`, `M` weighted by `κ⁻¹`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Interior-DOF eigenvectors, `κ⁻¹`-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    pub worst_residual: f64,
    pub operator: Arc<HeatOperator>,
}

impl EigenDecomposition {
    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    /// Largest deviation of the weighted Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.vectors.len() {
            let mi = self.operator.m_ii.mul_vec(&self.vectors[i]);
            for j in 0..=i {
                let g = dot(&mi, &self.vectors[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Nodal (zero-extended) eigenvector `i`.
    pub fn mode(&self, i: usize) -> Vec<f64> {
        self.operator.dofs.extend_zero(&self.vectors[i])
    }
}

pub fn assemble_weighted_eigen(
    mesh: &Mesh,
    kappa: &ScalarField,
    thermal: &TensorField,
    n_modes: usize,
) -> Result<EigenDecomposition> {
    let op = HeatOperator::new(mesh, kappa, thermal)?;
    eigen_from_operator(Arc::new(op), n_modes)
}

pub fn eigen_from_operator(op: Arc<HeatOperator>, n_modes: usize) -> Result<EigenDecomposition> {
    if n_modes > op.n_interior() {
        return Err(Error::Parameter(format!(
            "{n_modes} modes requested but only {} interior nodes",
            op.n_interior()
        )));
    }
    let pairs = smallest_eigenpairs(&op.k_ii, &op.m_ii, &op.k_factor, n_modes, EIGEN_TOL)?;
    let mut vectors = pairs.vectors;
    for v in &mut vectors {
        let nrm = op.m_ii.bilinear(v, v).sqrt();
        // Fix the sign so that the largest entry is positive.
        let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let s = big.signum() / nrm;
        v.iter_mut().for_each(|x| *x *= s);
    }
    if let Some(l) = pairs.values.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Solver(format!("non-positive eigenvalue {l}")));
    }
    Ok(EigenDecomposition {
        values: pairs.values,
        vectors,
        worst_residual: pairs.worst_residual,
        operator: op,
    })
}

/// `∇·(A∇ψ₀) + S = 0`, `ψ₀ = 0` on the boundary.
pub fn solve_static_heat(mesh: &Mesh, thermal: &TensorField, s: &ScalarField) -> Result<Vec<f64>> {
    s.check_len(mesh)?;
    let op = HeatOperator::new(mesh, &ScalarField::constant(mesh, 1.0), thermal)?;
    Ok(op.static_solution(s.values()))
}

/// Nodal temperature history.
#[derive(Debug, Clone)]
pub struct TemperatureField {
    pub grid: TimeGrid,
    /// `values[j]` is the nodal field at `t_j`.
    pub values: Vec<Vec<f64>>,
    /// Set when the modal truncation estimate exceeds tolerance.
    pub warning: Option<String>,
}

impl TemperatureField {
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("non-empty history")
    }

    /// Centered differences, one-sided at the ends.
    pub fn time_derivative(&self, j: usize) -> Result<Vec<f64>> {
        let n = self.values.len();
        if n < 2 {
            return Err(Error::Parameter(
                "a single time sample has no time derivative; use the static flux".into(),
            ));
        }
        let dt = self.grid.dt;
        let (a, b, scale) = if j == 0 {
            (1, 0, 1.0 / dt)
        } else if j == n - 1 {
            (n - 1, n - 2, 1.0 / dt)
        } else {
            (j + 1, j - 1, 0.5 / dt)
        };
        Ok(self.values[a]
            .iter()
            .zip(&self.values[b])
            .map(|(x, y)| (x - y) * scale)
            .collect())
    }
}

/// Per-time flux traces with the grid they belong to.
#[derive(Debug, Clone)]
pub struct FluxHistory {
    pub times: Vec<f64>,
    pub traces: Vec<FluxTrace>,
}

impl FluxHistory {
    /// `∫_{∂Ω} flux dS` at each time.
    pub fn integrated(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.integrate()).collect()
    }

    /// Discrete `L²(∂Ω × [0, T])` norm of the difference, relative to `self`.
    pub fn relative_l2_distance(&self, other: &FluxHistory) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        let n = self.traces.len();
        for (j, (a, b)) in self.traces.iter().zip(&other.traces).enumerate() {
            let wt = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            for ((x, y), w) in a.values.iter().zip(&b.values).zip(&a.weights) {
                num += wt * w * (x - y) * (x - y);
                den += wt * w * x * x;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// CSV with header `t, node_index, arc_s, flux`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t, node_index, arc_s, flux")?;
        for (t, tr) in self.times.iter().zip(&self.traces) {
            for k in 0..tr.nodes.len() {
                writeln!(w, "{:.10e}, {}, {:.10e}, {:.10e}", t, tr.nodes[k], tr.arc_s[k], tr.values[k])?;
            }
        }
        Ok(())
    }
}

fn phi1(z: f64) -> f64 {
    // (1 − e^{−z})/z
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// Modal solution for static or separable sources.
///
/// Writing `S = w·g(t)` and `ψ₀` for the static solution with source `w`,
/// `ψ = g(t)ψ₀ + Σ dᵢ(t)φᵢ` with `dᵢ' = −λᵢdᵢ − g'(t)cᵢ`,
/// `dᵢ(0) = −g(0)cᵢ`, `cᵢ = ⟨ψ₀, φᵢ⟩_{κ⁻¹}`. For static sources this is
/// `ψ₀ + Σ aᵢe^{−λᵢt}φᵢ` with `aᵢ = −cᵢ`. The modal ODE is integrated
/// exactly for piecewise-linear `g`.
pub fn solve_transient_eigen(
    mesh: &Mesh,
    eig: &EigenDecomposition,
    source: &SourceHistory,
    grid: &TimeGrid,
) -> Result<TemperatureField> {
    source.check(mesh, grid)?;
    let (w, g): (&ScalarField, Vec<f64>) = match source {
        SourceHistory::Static(w) => (w, vec![1.0; grid.len()]),
        SourceHistory::Separable { w, g } => (w, g.clone()),
        SourceHistory::General(_) => {
            return Err(Error::Parameter(
                "the modal solver needs a static or separable source".into(),
            ))
        }
    };
    let op = &eig.operator;
    let psi0_full = op.static_solution(w.values());
    let psi0 = op.dofs.restrict(&psi0_full);
    let m_psi0 = op.m_ii.mul_vec(&psi0);
    let c: Vec<f64> = eig.vectors.iter().map(|phi| dot(phi, &m_psi0)).collect();

    let norm2 = dot(&psi0, &m_psi0);
    let tail = (norm2 - c.iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt();
    let lam_n = *eig.values.last().unwrap_or(&f64::INFINITY);
    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dgmax = g
        .windows(2)
        .map(|p| ((p[1] - p[0]) / grid.dt).abs())
        .fold(0.0f64, f64::max);
    let t1 = grid.time(1.min(grid.n_steps)).max(grid.dt);
    let estimate = tail * (g[0].abs() * (-lam_n * t1).exp() + dgmax / lam_n);
    let scale = norm2.sqrt() * gmax.max(f64::MIN_POSITIVE);
    let warning = (estimate > TRUNCATION_TOL * scale).then(|| {
        format!(
            "modal truncation estimate {:.3e} relative with {} modes",
            estimate / scale,
            eig.n_modes()
        )
    });

    let n_i = op.n_interior();
    let mut d: Vec<f64> = c.iter().map(|ci| -g[0] * ci).collect();
    let mut values = Vec::with_capacity(grid.len());
    values.push(vec![0.0; mesh.n_nodes()]);
    let dt = grid.dt;
    for j in 1..grid.len() {
        let slope = (g[j] - g[j - 1]) / dt;
        let mut interior: Vec<f64> = psi0.iter().map(|p| g[j] * p).collect();
        for (i, lam) in eig.values.iter().enumerate() {
            let z = lam * dt;
            d[i] = (-z).exp() * d[i] - slope * c[i] * dt * phi1(z);
            let di = d[i];
            for (x, p) in interior.iter_mut().zip(&eig.vectors[i]) {
                *x += di * p;
            }
        }
        debug_assert_eq!(interior.len(), n_i);
        values.push(op.dofs.extend_zero(&interior));
    }
    Ok(TemperatureField {
        grid: *grid,
        values,
        warning,
    })
}

/// θ-scheme on `M ψ' = −Kψ + M₁S`.
pub fn solve_transient_timestep(
    mesh: &Mesh,
    op: &HeatOperator,
    source: &SourceHistory,
    grid: &TimeGrid,
    theta: f64,
) -> Result<TemperatureField> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::Parameter(format!("theta = {theta} outside [0.5, 1]")));
    }
    source.check(mesh, grid)?;
    let dt = grid.dt;
    let lhs_full = op.mass.add_scaled(theta * dt, &op.stiffness);
    let lhs = lhs_full.submatrix(&op.dofs.interior, &op.dofs.interior);
    let factor = EnvelopeCholesky::factor(&lhs)?;
    let n_i = op.n_interior();
    let mut psi = vec![0.0; n_i];
    let mut values = Vec::with_capacity(grid.len());
    values.push(vec![0.0; mesh.n_nodes()]);
    let mut b_prev = op.load(&source.at(0));
    for j in 1..grid.len() {
        let b_next = op.load(&source.at(j));
        let mpsi = op.m_ii.mul_vec(&psi);
        let kpsi = op.k_ii.mul_vec(&psi);
        let rhs: Vec<f64> = (0..n_i)
            .map(|i| {
                mpsi[i] - (1.0 - theta) * dt * kpsi[i]
                    + dt * (theta * b_next[i] + (1.0 - theta) * b_prev[i])
            })
            .collect();
        psi = factor.solve(&rhs);
        values.push(op.dofs.extend_zero(&psi));
        b_prev = b_next;
    }
    Ok(TemperatureField {
        grid: *grid,
        values,
        warning: None,
    })
}

/// Consistent outward heat flux `ν·A∇ψ` at every grid time.
pub fn boundary_heat_flux(
    mesh: &Mesh,
    op: &HeatOperator,
    psi: &TemperatureField,
    source: &SourceHistory,
) -> Result<FluxHistory> {
    source.check(mesh, &psi.grid)?;
    let mut traces = Vec::with_capacity(psi.values.len());
    for j in 0..psi.values.len() {
        let dpsi = psi.time_derivative(j)?;
        let r = op.boundary_residual(mesh, &psi.values[j], Some(&dpsi), &source.at(j));
        traces.push(FluxTrace::from_residual(mesh, &r));
    }
    Ok(FluxHistory {
        times: psi.grid.times(),
        traces,
    })
}

/// Flux of a steady temperature (`∂ₜψ = 0`).
pub fn boundary_heat_flux_static(mesh: &Mesh, op: &HeatOperator, psi: &[f64], source: &[f64]) -> FluxTrace {
    let r = op.boundary_residual(mesh, psi, None, source);
    FluxTrace::from_residual(mesh, &r)
}
