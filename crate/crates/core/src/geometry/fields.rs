//! Nodal P1 coefficient fields.
//!
//! A field may remember the closed-form function it was sampled from, in
//! which case pushforwards evaluate that function exactly at preimages
//! instead of interpolating nodal data.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;

use super::mesh::{is_symmetric, min_eigenvalue, Mesh, Point2};
use crate::coefficients::{ScalarCoefficient, TensorCoefficient};
use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point2) -> Matrix2<f64> + Send + Sync>;

#[derive(Clone)]
pub struct ScalarField {
    values: Vec<f64>,
    analytic: Option<ScalarFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("len", &self.values.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            values,
            analytic: None,
        }
    }

    pub fn with_analytic(values: Vec<f64>, f: ScalarFn) -> Self {
        Self {
            values,
            analytic: Some(f),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point2) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_shared_fn(mesh, Arc::new(f))
    }

    pub fn from_shared_fn(mesh: &Mesh, f: ScalarFn) -> Self {
        let values = mesh.nodes().iter().map(|&p| f(p)).collect();
        Self {
            values,
            analytic: Some(f),
        }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self::from_fn(mesh, move |_| c)
    }

    pub fn from_coefficient(mesh: &Mesh, c: &ScalarCoefficient) -> Self {
        let c = c.clone();
        Self::from_fn(mesh, move |p| c.value(p))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn analytic(&self) -> Option<&ScalarFn> {
        self.analytic.as_ref()
    }

    /// Mean of the three vertex values, i.e. the P1 interpolant at the centroid.
    pub fn centroid_value(&self, mesh: &Mesh, t: usize) -> f64 {
        let [a, b, c] = mesh.triangles()[t];
        (self.values[a] + self.values[b] + self.values[c]) / 3.0
    }

    pub fn check_len(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.n_nodes() {
            return Err(Error::InvalidCoefficient(format!(
                "field has {} values for {} nodes",
                self.values.len(),
                mesh.n_nodes()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficient(format!("non-finite value at node {i}")));
        }
        Ok(())
    }

    /// Checks the `κ`-role invariant `min > 0`.
    pub fn check_positive(&self, mesh: &Mesh) -> Result<()> {
        self.check_len(mesh)?;
        let m = self.min();
        if !(m > 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "scalar field minimum {m} is not positive"
            )));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact integral of the P1 interpolant.
    pub fn integrate(&self, mesh: &Mesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|t| mesh.geometry(t).area * self.centroid_value(mesh, t))
            .sum()
    }

    /// Exact `∫ f g` for two P1 fields.
    pub fn inner(&self, other: &ScalarField, mesh: &Mesh) -> f64 {
        p1_inner(mesh, &self.values, &other.values, None)
    }

    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        self.inner(self, mesh).max(0.0).sqrt()
    }

    /// P1 interpolation at an arbitrary point.
    pub fn interpolate(&self, mesh: &Mesh, locator: &super::PointLocator<'_>, p: Point2) -> Option<f64> {
        let (t, bc) = locator.locate(p)?;
        let tri = mesh.triangles()[t];
        Some((0..3).map(|i| bc[i] * self.values[tri[i]]).sum())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let analytic = self.analytic.clone().map(|g| -> ScalarFn { Arc::new(move |p| s * g(p)) });
        Self {
            values: self.values.iter().map(|v| s * v).collect(),
            analytic,
        }
    }
}

/// Exact P1 mass-matrix product `∫ w·f·g` with `w` piecewise constant
/// (one value per triangle, or 1 when absent).
pub fn p1_inner(mesh: &Mesh, f: &[f64], g: &[f64], weight: Option<&[f64]>) -> f64 {
    let mut s = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.geometry(t).area;
        let (f0, f1, f2) = (f[tri[0]], f[tri[1]], f[tri[2]]);
        let (g0, g1, g2) = (g[tri[0]], g[tri[1]], g[tri[2]]);
        let diag = f0 * g0 + f1 * g1 + f2 * g2;
        let sf = f0 + f1 + f2;
        let sg = g0 + g1 + g2;
        // ∫ φ_i φ_j = A/12 (1 + δ_ij)
        let v = a / 12.0 * (diag + sf * sg);
        s += weight.map_or(1.0, |w| w[t]) * v;
    }
    s
}

#[derive(Clone)]
pub struct TensorField {
    values: Vec<Matrix2<f64>>,
    analytic: Option<TensorFn>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("len", &self.values.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl TensorField {
    pub fn from_values(values: Vec<Matrix2<f64>>) -> Self {
        Self {
            values,
            analytic: None,
        }
    }

    pub fn with_analytic(values: Vec<Matrix2<f64>>, f: TensorFn) -> Self {
        Self {
            values,
            analytic: Some(f),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point2) -> Matrix2<f64> + Send + Sync + 'static) -> Self {
        Self::from_shared_fn(mesh, Arc::new(f))
    }

    pub fn from_shared_fn(mesh: &Mesh, f: TensorFn) -> Self {
        let values = mesh.nodes().iter().map(|&p| f(p)).collect();
        Self {
            values,
            analytic: Some(f),
        }
    }

    pub fn identity(mesh: &Mesh) -> Self {
        Self::from_fn(mesh, |_| Matrix2::identity())
    }

    pub fn isotropic(scalar: &ScalarField) -> Self {
        let analytic = scalar
            .analytic()
            .cloned()
            .map(|g| -> TensorFn { Arc::new(move |p| Matrix2::identity() * g(p)) });
        Self {
            values: scalar
                .values()
                .iter()
                .map(|&v| Matrix2::identity() * v)
                .collect(),
            analytic,
        }
    }

    pub fn from_coefficient(mesh: &Mesh, c: &TensorCoefficient) -> Self {
        let c = c.clone();
        Self::from_fn(mesh, move |p| c.value(p))
    }

    pub fn values(&self) -> &[Matrix2<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn analytic(&self) -> Option<&TensorFn> {
        self.analytic.as_ref()
    }

    pub fn centroid_value(&self, mesh: &Mesh, t: usize) -> Matrix2<f64> {
        let [a, b, c] = mesh.triangles()[t];
        (self.values[a] + self.values[b] + self.values[c]) / 3.0
    }

    pub fn interpolate(
        &self,
        mesh: &Mesh,
        locator: &super::PointLocator<'_>,
        p: Point2,
    ) -> Option<Matrix2<f64>> {
        let (t, bc) = locator.locate(p)?;
        let tri = mesh.triangles()[t];
        Some((0..3).map(|i| self.values[tri[i]] * bc[i]).sum())
    }

    /// Checks symmetry to 1e-12 and `λ_min ≥ c` at every node.
    pub fn check_spd(&self, mesh: &Mesh, c: f64) -> Result<()> {
        if self.values.len() != mesh.n_nodes() {
            return Err(Error::InvalidCoefficient(format!(
                "tensor field has {} values for {} nodes",
                self.values.len(),
                mesh.n_nodes()
            )));
        }
        for (i, m) in self.values.iter().enumerate() {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidCoefficient(format!("non-finite tensor at node {i}")));
            }
            if !is_symmetric(m, 1e-12) {
                return Err(Error::InvalidCoefficient(format!("tensor at node {i} not symmetric")));
            }
            let l = min_eigenvalue(m);
            if !(l >= c && l > 0.0) {
                return Err(Error::InvalidCoefficient(format!(
                    "tensor at node {i} has smallest eigenvalue {l} below {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let analytic = self.analytic.clone().map(|g| -> TensorFn { Arc::new(move |p| g(p) * s) });
        Self {
            values: self.values.iter().map(|m| m * s).collect(),
            analytic,
        }
    }
}

/// The unknowns `(γ, κ, A)` on one mesh.
#[derive(Debug, Clone)]
pub struct CoefficientTriple {
    pub label: String,
    pub gamma: TensorField,
    pub kappa: ScalarField,
    pub thermal: TensorField,
}

impl CoefficientTriple {
    pub fn new(label: impl Into<String>, gamma: TensorField, kappa: ScalarField, thermal: TensorField) -> Self {
        Self {
            label: label.into(),
            gamma,
            kappa,
            thermal,
        }
    }

    /// `γ = I`, `κ = 1`, `A = I`.
    pub fn unit(mesh: &Mesh) -> Self {
        Self::new(
            "unit",
            TensorField::identity(mesh),
            ScalarField::constant(mesh, 1.0),
            TensorField::identity(mesh),
        )
    }

    pub fn from_catalog(
        mesh: &Mesh,
        gamma: &TensorCoefficient,
        kappa: &ScalarCoefficient,
        thermal: &TensorCoefficient,
    ) -> Self {
        Self::new(
            format!("gamma={};kappa={};A={}", gamma.label(), kappa.label(), thermal.label()),
            TensorField::from_coefficient(mesh, gamma),
            ScalarField::from_coefficient(mesh, kappa),
            TensorField::from_coefficient(mesh, thermal),
        )
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        self.gamma.check_spd(mesh, f64::MIN_POSITIVE)?;
        self.thermal.check_spd(mesh, f64::MIN_POSITIVE)?;
        self.kappa.check_positive(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_disk_mesh;

    #[test]
    fn integrals_of_linear_fields_are_exact() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let one = ScalarField::constant(&mesh, 1.0);
        let x = ScalarField::from_fn(&mesh, |p| p.x);
        assert!((one.integrate(&mesh) - mesh.total_area()).abs() < 1e-13);
        assert!(x.integrate(&mesh).abs() < 1e-13);
        assert!((one.inner(&one, &mesh) - mesh.total_area()).abs() < 1e-13);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mesh = build_disk_mesh(0.3).unwrap();
        let k = ScalarField::constant(&mesh, 0.0);
        assert!(k.check_positive(&mesh).is_err());
        let t = TensorField::from_fn(&mesh, |_| Matrix2::new(1.0, 0.5, 0.0, 1.0));
        assert!(t.check_spd(&mesh, 0.1).is_err());
        let t = TensorField::from_fn(&mesh, |_| Matrix2::new(1.0, 2.0, 2.0, 1.0));
        assert!(t.check_spd(&mesh, 0.0).is_err());
        CoefficientTriple::unit(&mesh).validate(&mesh).unwrap();
    }
}
