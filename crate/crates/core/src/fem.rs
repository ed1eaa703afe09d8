//! P1 assembly on a disk mesh with coefficients sampled at centroids.

use nalgebra::Matrix2;

use crate::error::Result;
use crate::geometry::{Mesh, ScalarField, TensorField};
use crate::linalg::{CsrMatrix, EnvelopeCholesky, SubMatrix};

/// Interior/boundary split of the nodal unknowns.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// `interior[node]` = interior index.
    pub interior: Vec<Option<usize>>,
    /// `interior_nodes[k]` = node of interior index `k`.
    pub interior_nodes: Vec<usize>,
    /// `boundary[node]` = position in the boundary loop.
    pub boundary: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut interior = vec![None; mesh.n_nodes()];
        let mut interior_nodes = Vec::new();
        let mut boundary = vec![None; mesh.n_nodes()];
        for i in 0..mesh.n_nodes() {
            if let Some(s) = mesh.boundary_slot(i) {
                boundary[i] = Some(s);
            } else {
                interior[i] = Some(interior_nodes.len());
                interior_nodes.push(i);
            }
        }
        Self {
            interior,
            interior_nodes,
            boundary,
        }
    }

    pub fn n_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&i| full[i]).collect()
    }

    /// Interior values scattered into a nodal vector that is zero on the boundary.
    pub fn extend_zero(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.interior.len()];
        for (k, &i) in self.interior_nodes.iter().enumerate() {
            full[i] = interior[k];
        }
        full
    }
}

/// `Σ_T |T| ∇φ_i·A_T∇φ_j` with `A_T` the nodal average over `T`.
pub fn assemble_stiffness(mesh: &Mesh, a: &TensorField) -> CsrMatrix {
    let tri_vals: Vec<Matrix2<f64>> = (0..mesh.n_triangles())
        .map(|t| a.centroid_value(mesh, t))
        .collect();
    assemble_stiffness_tri(mesh, &tri_vals)
}

pub fn assemble_stiffness_tri(mesh: &Mesh, a: &[Matrix2<f64>]) -> CsrMatrix {
    let mut k = CsrMatrix::from_cells(mesh.n_nodes(), mesh.triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.geometry(t);
        let at = &a[t];
        for i in 0..3 {
            let agi = at * g.grads[i];
            for j in 0..3 {
                k.add(tri[j], tri[i], g.area * g.grads[j].dot(&agi));
            }
        }
    }
    k
}

/// Consistent mass matrix with an optional piecewise-constant weight.
pub fn assemble_mass(mesh: &Mesh, weight: Option<&[f64]>) -> CsrMatrix {
    let mut m = CsrMatrix::from_cells(mesh.n_nodes(), mesh.triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.geometry(t).area * weight.map_or(1.0, |w| w[t]);
        for i in 0..3 {
            for j in 0..3 {
                let f = if i == j { a / 6.0 } else { a / 12.0 };
                m.add(tri[i], tri[j], f);
            }
        }
    }
    m
}

/// Per-triangle values of `1/κ` at centroids.
pub fn inverse_kappa_weights(mesh: &Mesh, kappa: &ScalarField) -> Vec<f64> {
    (0..mesh.n_triangles())
        .map(|t| 1.0 / kappa.centroid_value(mesh, t))
        .collect()
}

/// Interior block plus its factorization.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub dofs: DofMap,
    pub matrix: SubMatrix,
    pub factor: EnvelopeCholesky,
}

impl ReducedSystem {
    pub fn new(mesh: &Mesh, full: &CsrMatrix) -> Result<Self> {
        let dofs = DofMap::new(mesh);
        let matrix = full.submatrix(&dofs.interior, &dofs.interior);
        let factor = EnvelopeCholesky::factor(&matrix)?;
        Ok(Self {
            dofs,
            matrix,
            factor,
        })
    }
}
