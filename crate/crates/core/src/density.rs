//! Spans of gradient products `∇u_i·γ∇u_j` in `L²(Ω)`.
//!
//! The `u_i` solve the conductivity equation with traces
//! `1, cos θ, sin θ, …, cos Mθ, sin Mθ`. Products are formed per triangle,
//! projected to nodes and compared in the P1 mass inner product. Projections
//! use Jacobi-scaled normal equations with Tikhonov regularization
//! `1e−10·trace/dim`, followed by a fixed number of iterated-Tikhonov
//! refinement sweeps against the unregularized Gram matrix.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::cgo::{fourier_decay_probe, DecayProbeOptions, DecayReport, PotentialField, SpectralGrid};
use crate::elliptic::{project_to_nodes, triangle_products, BoundaryData, ConductivityProblem};
use crate::error::{Error, Result};
use crate::fem::assemble_mass;
use crate::geometry::{Mesh, Point2, ScalarField, TensorField};
use crate::linalg::CsrMatrix;

pub const MAX_TRACE_ORDER: usize = 24;
pub const REGULARIZATION: f64 = 1e-10;
pub const DEGENERATE_RATIO: f64 = 1e-10;
pub const REFINEMENT_STEPS: usize = 40;

#[derive(Debug, Clone)]
pub struct ProductFamily {
    m: usize,
    trace_labels: Vec<String>,
    pairs: Vec<(usize, usize)>,
    products: Vec<ScalarField>,
    min_diagonal_product: f64,
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    mass: CsrMatrix,
}

fn mass_apply(mass: &CsrMatrix, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(basis.nrows(), basis.ncols());
    for c in 0..basis.ncols() {
        let col: Vec<f64> = basis.column(c).iter().copied().collect();
        let mc = mass.mul_vec(&col);
        out.column_mut(c).copy_from_slice(&mc);
    }
    out
}

/// Solves the conductivity equation for the `2M + 1` trigonometric traces
/// and forms all pairwise products.
pub fn build_family(mesh: &Mesh, gamma: &TensorField, m: usize) -> Result<ProductFamily> {
    if m > MAX_TRACE_ORDER {
        return Err(Error::Parameter(format!(
            "trace order M = {m} exceeds {MAX_TRACE_ORDER}"
        )));
    }
    let problem = ConductivityProblem::new(mesh, gamma)?;
    let mut traces = vec![BoundaryData::trigonometric(mesh, 0, false)];
    for j in 1..=m {
        traces.push(BoundaryData::trigonometric(mesh, j, false));
        traces.push(BoundaryData::trigonometric(mesh, j, true));
    }
    let solutions = traces
        .iter()
        .map(|f| problem.solve(mesh, f))
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    let mut products = Vec::new();
    let mut min_diag = f64::INFINITY;
    for i in 0..solutions.len() {
        for j in i..solutions.len() {
            let per_tri = triangle_products(mesh, &solutions[i], &solutions[j]);
            if i == j {
                min_diag = per_tri.iter().copied().fold(min_diag, f64::min);
            }
            pairs.push((i, j));
            products.push(project_to_nodes(mesh, &per_tri));
        }
    }
    let n = mesh.n_nodes();
    let basis = DMatrix::from_fn(n, products.len(), |r, c| products[c].values()[r]);
    let mass = assemble_mass(mesh, None);
    let gram = basis.transpose() * mass_apply(&mass, &basis);
    let gram = (&gram + gram.transpose()) * 0.5;
    Ok(ProductFamily {
        m,
        trace_labels: traces.iter().map(|t| t.label.clone()).collect(),
        pairs,
        products,
        min_diagonal_product: min_diag,
        basis,
        gram,
        mass,
    })
}

/// Result of projecting a target onto the span of a family.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// `target − proj(target)`.
    pub orthogonal: ScalarField,
    /// `‖target − proj‖/‖target‖`, 0 for a zero target.
    pub residual: f64,
}

impl ProductFamily {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn trace_labels(&self) -> &[String] {
        &self.trace_labels
    }

    /// Trace indices `(i, j)` of each product.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn products(&self) -> &[ScalarField] {
        &self.products
    }

    pub fn product(&self, i: usize, j: usize) -> Option<&ScalarField> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.iter().position(|&p| p == (i, j)).map(|k| &self.products[k])
    }

    /// Smallest per-triangle value of the diagonal products `B_ii`.
    pub fn min_diagonal_product(&self) -> f64 {
        self.min_diagonal_product
    }

    /// Gram diagonal below which a product counts as identically zero.
    fn zero_floor(&self) -> f64 {
        let max_diag = (0..self.len()).map(|i| self.gram[(i, i)]).fold(1.0, f64::max);
        1e-20 * max_diag
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.gram.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Orthogonal projection in the `L²` product weighted by a
    /// piecewise-constant `weight` (one value per triangle).
    pub fn project(&self, mesh: &Mesh, target: &ScalarField, weight: Option<&[f64]>) -> Result<Projection> {
        target.check_len(mesh)?;
        if let Some(w) = weight {
            if w.len() != mesh.n_triangles() {
                return Err(Error::Parameter(format!(
                    "weight has {} values for {} triangles",
                    w.len(),
                    mesh.n_triangles()
                )));
            }
        }
        let weighted_mass;
        let (mass, gram) = match weight {
            None => (&self.mass, self.gram.clone()),
            Some(w) => {
                weighted_mass = assemble_mass(mesh, Some(w));
                let g = self.basis.transpose() * mass_apply(&weighted_mass, &self.basis);
                (&weighted_mass, (&g + g.transpose()) * 0.5)
            }
        };
        let t = target.values();
        let mt = mass.mul_vec(t);
        let norm2: f64 = t.iter().zip(&mt).map(|(a, b)| a * b).sum();
        let k = self.products.len();
        // Targets below the zero-product floor count as zero.
        let floor = self.zero_floor();
        if norm2 <= floor || k == 0 {
            return Ok(Projection {
                coefficients: vec![0.0; k],
                orthogonal: target.clone(),
                residual: if norm2 <= floor { 0.0 } else { 1.0 },
            });
        }
        let rhs = self.basis.transpose() * DVector::from_column_slice(&mt);

        // Jacobi scaling; numerically zero products are dropped.
        let scale: Vec<f64> = (0..k)
            .map(|i| {
                let d = gram[(i, i)];
                if d > floor {
                    1.0 / d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let active: Vec<usize> = (0..k).filter(|&i| scale[i] > 0.0).collect();
        let mut coefficients = vec![0.0; k];
        if !active.is_empty() {
            let na = active.len();
            let mut g = DMatrix::from_fn(na, na, |a, b| {
                gram[(active[a], active[b])] * scale[active[a]] * scale[active[b]]
            });
            let g0 = g.clone();
            let eps = REGULARIZATION * g.trace() / na as f64;
            for i in 0..na {
                g[(i, i)] += eps;
            }
            let b = DVector::from_fn(na, |a, _| rhs[active[a]] * scale[active[a]]);
            let chol = g
                .cholesky()
                .ok_or_else(|| Error::Solver("regularized Gram matrix is not positive definite".into()))?;
            let mut c = chol.solve(&b);
            for _ in 0..REFINEMENT_STEPS {
                let r = &b - &g0 * &c;
                c += chol.solve(&r);
            }
            for (a, &i) in active.iter().enumerate() {
                coefficients[i] = c[a] * scale[i];
            }
        }
        let fit = &self.basis * DVector::from_column_slice(&coefficients);
        let orth: Vec<f64> = t.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
        let morth = mass.mul_vec(&orth);
        let r2: f64 = orth.iter().zip(&morth).map(|(a, b)| a * b).sum();
        Ok(Projection {
            coefficients,
            orthogonal: ScalarField::from_values(orth),
            residual: (r2.max(0.0) / norm2).sqrt(),
        })
    }

    /// Largest `|∫ B_ij f| / (‖B_ij‖·scale)` over the family members.
    pub fn orthogonality_defect(&self, f: &ScalarField, scale: f64) -> f64 {
        let mf = self.mass.mul_vec(f.values());
        let floor = self.zero_floor();
        let mut worst = 0.0f64;
        for (c, p) in self.products.iter().enumerate() {
            if self.gram[(c, c)] <= floor || scale <= 0.0 {
                continue;
            }
            let bn = self.gram[(c, c)].sqrt();
            let ip: f64 = p.values().iter().zip(&mf).map(|(a, b)| a * b).sum();
            worst = worst.max(ip.abs() / (bn * scale));
        }
        worst
    }
}

/// `‖target − proj_span(target)‖/‖target‖`; 0 for a zero target.
pub fn projection_residual(mesh: &Mesh, target: &ScalarField, fam: &ProductFamily) -> Result<f64> {
    Ok(fam.project(mesh, target, None)?.residual)
}

/// Residual in the `L²` product weighted per triangle.
pub fn projection_residual_weighted(
    mesh: &Mesh,
    target: &ScalarField,
    fam: &ProductFamily,
    weight: &[f64],
) -> Result<f64> {
    Ok(fam.project(mesh, target, Some(weight))?.residual)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub m: usize,
    pub target_id: String,
    pub residual: f64,
}

pub fn write_residual_table<W: Write>(mut w: W, rows: &[ResidualRow]) -> std::io::Result<()> {
    writeln!(w, "M, target_id, residual")?;
    for r in rows {
        writeln!(w, "{}, {}, {:.10e}", r.m, r.target_id, r.residual)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalizedDecay {
    pub seed: DecayReport,
    /// `None` when the orthogonalized field is numerically zero.
    pub orthogonalized: Option<DecayReport>,
    /// Seed exponent minus orthogonalized exponent; positive when the
    /// orthogonalized field decays faster.
    pub exponent_gap: Option<f64>,
    pub degenerate: bool,
    /// `‖orthogonalized‖/‖seed‖`.
    pub norm_ratio: f64,
    /// Worst `|∫ B_ij·orthogonalized| / (‖B_ij‖‖seed‖)`.
    pub orthogonality_defect: f64,
}

/// P1 evaluation of a nodal field for points of the unit disk, pulling points
/// between the inscribed polygon and the circle slightly inward.
pub fn disk_evaluator<'a>(
    mesh: &'a Mesh,
    field: &'a ScalarField,
) -> impl Fn(f64, f64) -> Complex64 + Sync + 'a {
    let locator = mesh.locator();
    move |x, y| {
        let mut p = Point2::new(x, y);
        for _ in 0..40 {
            if let Some(v) = field.interpolate(mesh, &locator, p) {
                return Complex64::new(v, 0.0);
            }
            p *= 1.0 - 1e-3;
        }
        Complex64::new(0.0, 0.0)
    }
}

/// Projects `seed` onto the orthogonal complement of the family and probes
/// the Fourier decay of both fields.
#[allow(clippy::too_many_arguments)]
pub fn orthogonalized_decay(
    mesh: &Mesh,
    fam: &ProductFamily,
    seed: &ScalarField,
    grid: &SpectralGrid,
    pot: &PotentialField,
    k_list: &[Complex64],
    opts: &DecayProbeOptions,
) -> Result<OrthogonalizedDecay> {
    let proj = fam.project(mesh, seed, None)?;
    let seed_norm = seed.l2_norm(mesh);
    let orth_norm = proj.orthogonal.l2_norm(mesh);
    let norm_ratio = if seed_norm > 0.0 { orth_norm / seed_norm } else { 0.0 };
    let seed_report = fourier_decay_probe(grid, pot, &disk_evaluator(mesh, seed), k_list, "seed", opts)?;
    let degenerate = orth_norm < DEGENERATE_RATIO * seed_norm || seed_norm == 0.0;
    if degenerate {
        return Ok(OrthogonalizedDecay {
            seed: seed_report,
            orthogonalized: None,
            exponent_gap: None,
            degenerate,
            norm_ratio,
            orthogonality_defect: 0.0,
        });
    }
    let orth_report = fourier_decay_probe(
        grid,
        pot,
        &disk_evaluator(mesh, &proj.orthogonal),
        k_list,
        "orthogonalized",
        opts,
    )?;
    let gap = seed_report.decay_exponent - orth_report.decay_exponent;
    Ok(OrthogonalizedDecay {
        seed: seed_report,
        orthogonalized: Some(orth_report),
        exponent_gap: Some(gap),
        degenerate,
        norm_ratio,
        orthogonality_defect: fam.orthogonality_defect(&proj.orthogonal, seed_norm),
    })
}
