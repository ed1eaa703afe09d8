//! Conductivity equation `∇·(γ∇u) = 0` with Dirichlet data.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness_tri, ReducedSystem};
use crate::geometry::{Mesh, Point2, ScalarField, TensorField};
use crate::linalg::CsrMatrix;

/// Boundary voltage, one value per boundary node in loop order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub label: String,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("boundary value {i} is not finite")));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn from_fn(mesh: &Mesh, label: impl Into<String>, f: impl Fn(Point2) -> f64) -> Result<Self> {
        let values = mesh.boundary_nodes().iter().map(|&b| f(mesh.node(b))).collect();
        Self::new(label, values)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            label: format!("const({c})"),
            values: vec![c; mesh.boundary_nodes().len()],
        }
    }

    /// `cos(mθ)` for `sine == false`, `sin(mθ)` otherwise.
    pub fn trigonometric(mesh: &Mesh, m: usize, sine: bool) -> Self {
        let label = if m == 0 {
            "1".to_string()
        } else if sine {
            format!("sin({m}t)")
        } else {
            format!("cos({m}t)")
        };
        let values = mesh
            .boundary_nodes()
            .iter()
            .map(|&b| {
                let p = mesh.node(b);
                let th = p.y.atan2(p.x);
                let a = m as f64 * th;
                if sine {
                    a.sin()
                } else {
                    a.cos()
                }
            })
            .collect();
        Self { label, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.boundary_nodes().len() {
            return Err(Error::Parameter(format!(
                "boundary data has {} values for {} boundary nodes",
                self.values.len(),
                mesh.boundary_nodes().len()
            )));
        }
        Ok(())
    }
}

/// Boundary trace of a conormal derivative with its quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxTrace {
    /// Boundary nodes in loop order.
    pub nodes: Vec<usize>,
    /// Arc-length position of each node from the first one.
    pub arc_s: Vec<f64>,
    /// Lumped arc-length weights (sum to 2π).
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

impl FluxTrace {
    /// Divides a boundary residual (one entry per loop node) by the arc weights.
    pub fn from_residual(mesh: &Mesh, residual: &[f64]) -> Self {
        let weights = mesh.boundary_arc_weights();
        let values = residual.iter().zip(&weights).map(|(r, w)| r / w).collect();
        Self {
            nodes: mesh.boundary_nodes().to_vec(),
            arc_s: mesh.boundary_arc_positions(),
            weights,
            values,
        }
    }

    pub fn integrate(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `⟨self, g⟩` against boundary data with the same quadrature.
    pub fn pair(&self, g: &BoundaryData) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .zip(g.values())
            .map(|((v, w), gv)| v * w * gv)
            .sum()
    }
}

/// Factorized conductivity problem for repeated solves with one `γ`.
#[derive(Debug, Clone)]
pub struct ConductivityProblem {
    gamma_tri: Arc<Vec<Matrix2<f64>>>,
    stiffness: Arc<CsrMatrix>,
    reduced: ReducedSystem,
}

impl ConductivityProblem {
    pub fn new(mesh: &Mesh, gamma: &TensorField) -> Result<Self> {
        gamma.check_spd(mesh, f64::MIN_POSITIVE)?;
        let gamma_tri: Vec<Matrix2<f64>> = (0..mesh.n_triangles())
            .map(|t| gamma.centroid_value(mesh, t))
            .collect();
        let stiffness = assemble_stiffness_tri(mesh, &gamma_tri);
        let reduced = ReducedSystem::new(mesh, &stiffness).map_err(|e| {
            Error::Solver(format!(
                "conductivity stiffness ({} interior nodes): {e}",
                mesh.n_nodes() - mesh.boundary_nodes().len()
            ))
        })?;
        Ok(Self {
            gamma_tri: Arc::new(gamma_tri),
            stiffness: Arc::new(stiffness),
            reduced,
        })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn solve(&self, mesh: &Mesh, f: &BoundaryData) -> Result<VoltageField> {
        f.check(mesh)?;
        let mut u = vec![0.0; mesh.n_nodes()];
        for (k, &b) in mesh.boundary_nodes().iter().enumerate() {
            u[b] = f.values()[k];
        }
        // rhs = −K_IB f
        let dofs = &self.reduced.dofs;
        let mut rhs = vec![0.0; dofs.n_interior()];
        for (k, &i) in dofs.interior_nodes.iter().enumerate() {
            rhs[k] = -self
                .stiffness
                .row(i)
                .filter(|&(j, _)| dofs.boundary[j].is_some())
                .map(|(j, v)| v * u[j])
                .sum::<f64>();
        }
        let ui = self.reduced.factor.solve(&rhs);
        for (k, &i) in dofs.interior_nodes.iter().enumerate() {
            u[i] = ui[k];
        }
        Ok(VoltageField {
            values: u,
            boundary: f.clone(),
            gamma_tri: self.gamma_tri.clone(),
            stiffness: self.stiffness.clone(),
        })
    }
}

/// Nodal FEM voltage with the data that generated it.
#[derive(Debug, Clone)]
pub struct VoltageField {
    values: Vec<f64>,
    boundary: BoundaryData,
    gamma_tri: Arc<Vec<Matrix2<f64>>>,
    stiffness: Arc<CsrMatrix>,
}

impl VoltageField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_data(&self) -> &BoundaryData {
        &self.boundary
    }

    /// Per-triangle conductivity used in assembly.
    pub fn gamma_triangles(&self) -> &[Matrix2<f64>] {
        &self.gamma_tri
    }

    pub fn gradient(&self, mesh: &Mesh, t: usize) -> Point2 {
        let g = mesh.geometry(t);
        let tri = mesh.triangles()[t];
        (0..3).map(|i| g.grads[i] * self.values[tri[i]]).sum()
    }

    /// Weak residual on interior test functions, max norm.
    pub fn interior_residual(&self, mesh: &Mesh) -> f64 {
        let r = self.stiffness.mul_vec(&self.values);
        (0..mesh.n_nodes())
            .filter(|&i| !mesh.is_boundary(i))
            .map(|i| r[i].abs())
            .fold(0.0, f64::max)
    }
}

pub fn solve_conductivity(mesh: &Mesh, gamma: &TensorField, f: &BoundaryData) -> Result<VoltageField> {
    ConductivityProblem::new(mesh, gamma)?.solve(mesh, f)
}

/// Consistent Dirichlet-to-Neumann flux `ν·γ∇u`.
pub fn dn_map(mesh: &Mesh, u: &VoltageField) -> FluxTrace {
    let r = u.stiffness.mul_vec(&u.values);
    let residual: Vec<f64> = mesh.boundary_nodes().iter().map(|&b| r[b]).collect();
    FluxTrace::from_residual(mesh, &residual)
}

/// `Q_γ(f) = ∫ ∇u·γ∇u`.
pub fn energy_form(mesh: &Mesh, u: &VoltageField) -> f64 {
    triangle_energy(mesh, u)
        .iter()
        .enumerate()
        .map(|(t, e)| mesh.geometry(t).area * e)
        .sum()
}

/// Per-triangle `∇u·γ∇v`.
pub fn triangle_products(mesh: &Mesh, u: &VoltageField, v: &VoltageField) -> Vec<f64> {
    (0..mesh.n_triangles())
        .map(|t| {
            let gu = u.gradient(mesh, t);
            let gv = v.gradient(mesh, t);
            gu.dot(&(u.gamma_tri[t] * gv))
        })
        .collect()
}

pub fn triangle_energy(mesh: &Mesh, u: &VoltageField) -> Vec<f64> {
    triangle_products(mesh, u, u)
}

/// Area-weighted projection of a piecewise-constant field to nodes. The
/// P1 integral of the result equals `Σ |T| c_T`.
pub fn project_to_nodes(mesh: &Mesh, per_triangle: &[f64]) -> ScalarField {
    let mut num = vec![0.0; mesh.n_nodes()];
    let mut den = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.geometry(t).area;
        for &v in tri {
            num[v] += a * per_triangle[t];
            den[v] += a;
        }
    }
    ScalarField::from_values(num.iter().zip(&den).map(|(n, d)| n / d).collect())
}

/// Joule density `∇u·γ∇u` projected to nodes.
pub fn energy_density(mesh: &Mesh, u: &VoltageField) -> ScalarField {
    project_to_nodes(mesh, &triangle_energy(mesh, u))
}

/// `q = Δ√γ/√γ` at the mesh nodes for a closed-form isotropic `γ`.
pub fn liouville_potential(
    mesh: &Mesh,
    gamma: &crate::coefficients::ScalarCoefficient,
) -> Result<ScalarField> {
    let values = mesh
        .nodes()
        .iter()
        .map(|&p| gamma.liouville_potential_at(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarField::from_values(values))
}

/// `Re zⁿ` restricted to the boundary; its harmonic extension has energy `nπ`.
pub fn harmonic_trace(mesh: &Mesh, n: u32) -> BoundaryData {
    let mut b = BoundaryData::trigonometric(mesh, n as usize, false);
    b.label = format!("Re z^{n}");
    b
}

/// Exact `Q` of [`harmonic_trace`] with `γ = I`.
pub fn harmonic_trace_energy(n: u32) -> f64 {
    n as f64 * PI
}
