//! Coefficient pushforwards under a diffeomorphism `F`:
//!
//! * tensors: `F_*T = (DF·T·DFᵀ/|DF|) ∘ F⁻¹`
//! * heat capacity weight: `κ̃ = (|DF|·κ) ∘ F⁻¹`
//! * sources: `S̃ = (S/|DF|) ∘ F⁻¹`
//!
//! Fields sampled from closed-form functions are pushed forward exactly;
//! purely nodal fields are interpolated at the preimage.

use std::sync::Arc;

use nalgebra::Matrix2;

use super::diffeo::DiffeoRef;
use super::fields::{CoefficientTriple, ScalarField, ScalarFn, TensorField, TensorFn};
use super::mesh::{Mesh, Point2};
use crate::error::{Error, Result};

/// Pointwise tensor rule for a given jacobian.
pub fn push_tensor_value(t: &Matrix2<f64>, jac: &Matrix2<f64>) -> Matrix2<f64> {
    let det = jac.determinant();
    let m = jac * t * jac.transpose() / det;
    // Exact symmetrization; rounding can break it by an ulp.
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

fn checked_det(f: &DiffeoRef, x: Point2) -> Result<(Matrix2<f64>, f64)> {
    let j = f.jacobian(x);
    let det = j.determinant();
    if !(det > 0.0) {
        return Err(Error::SingularJacobian { x: x.x, y: x.y, det });
    }
    Ok((j, det))
}

pub fn pushforward_tensor_fn(t: TensorFn, f: DiffeoRef) -> TensorFn {
    Arc::new(move |y| {
        let x = f.inverse(y);
        push_tensor_value(&t(x), &f.jacobian(x))
    })
}

pub fn pushforward_kappa_fn(k: ScalarFn, f: DiffeoRef) -> ScalarFn {
    Arc::new(move |y| {
        let x = f.inverse(y);
        f.jacobian_det(x) * k(x)
    })
}

pub fn pushforward_source_fn(s: ScalarFn, f: DiffeoRef) -> ScalarFn {
    Arc::new(move |y| {
        let x = f.inverse(y);
        s(x) / f.jacobian_det(x)
    })
}

fn preimages(mesh: &Mesh, f: &DiffeoRef) -> Result<Vec<(Point2, Matrix2<f64>, f64)>> {
    mesh.nodes()
        .iter()
        .map(|&y| {
            let x = f.inverse(y);
            let (j, det) = checked_det(f, x)?;
            Ok((x, j, det))
        })
        .collect()
}

pub fn pushforward_tensor(mesh: &Mesh, t: &TensorField, f: &DiffeoRef) -> Result<TensorField> {
    if f.is_identity() {
        return Ok(t.clone());
    }
    let pre = preimages(mesh, f)?;
    if let Some(g) = t.analytic() {
        let push = pushforward_tensor_fn(g.clone(), f.clone());
        let values = pre
            .iter()
            .map(|(x, j, _)| push_tensor_value(&g(*x), j))
            .collect::<Vec<_>>();
        let mut out = TensorField::from_values(values);
        out = attach_tensor(out, push);
        return Ok(out);
    }
    let loc = mesh.locator();
    let values = pre
        .iter()
        .map(|(x, j, _)| {
            let tx = t
                .interpolate(mesh, &loc, *x)
                .ok_or_else(|| Error::Domain(format!("preimage ({}, {}) outside mesh", x.x, x.y)))?;
            Ok(push_tensor_value(&tx, j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TensorField::from_values(values))
}

fn push_scalar(
    mesh: &Mesh,
    k: &ScalarField,
    f: &DiffeoRef,
    rule: fn(f64, f64) -> f64,
    lift: fn(ScalarFn, DiffeoRef) -> ScalarFn,
) -> Result<ScalarField> {
    if f.is_identity() {
        return Ok(k.clone());
    }
    let pre = preimages(mesh, f)?;
    if let Some(g) = k.analytic() {
        let values = pre.iter().map(|(x, _, det)| rule(g(*x), *det)).collect();
        return Ok(attach_scalar(ScalarField::from_values(values), lift(g.clone(), f.clone())));
    }
    let loc = mesh.locator();
    let values = pre
        .iter()
        .map(|(x, _, det)| {
            let v = k
                .interpolate(mesh, &loc, *x)
                .ok_or_else(|| Error::Domain(format!("preimage ({}, {}) outside mesh", x.x, x.y)))?;
            Ok(rule(v, *det))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarField::from_values(values))
}

pub fn pushforward_kappa(mesh: &Mesh, k: &ScalarField, f: &DiffeoRef) -> Result<ScalarField> {
    push_scalar(mesh, k, f, |v, det| det * v, pushforward_kappa_fn)
}

pub fn pushforward_source(mesh: &Mesh, s: &ScalarField, f: &DiffeoRef) -> Result<ScalarField> {
    push_scalar(mesh, s, f, |v, det| v / det, pushforward_source_fn)
}

/// `(F_*γ, κ̃, F_*A)`.
pub fn pushforward_triple(mesh: &Mesh, t: &CoefficientTriple, f: &DiffeoRef) -> Result<CoefficientTriple> {
    Ok(CoefficientTriple::new(
        format!("{}|pushed", t.label),
        pushforward_tensor(mesh, &t.gamma, f)?,
        pushforward_kappa(mesh, &t.kappa, f)?,
        pushforward_tensor(mesh, &t.thermal, f)?,
    ))
}

fn attach_tensor(field: TensorField, g: TensorFn) -> TensorField {
    TensorField::with_analytic(field.values().to_vec(), g)
}

fn attach_scalar(field: ScalarField, g: ScalarFn) -> ScalarField {
    ScalarField::with_analytic(field.into_values(), g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::diffeo::{make_bump_diffeo, Identity};
    use crate::geometry::build_disk_mesh;

    #[test]
    fn stretch_example() {
        let j = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        let m = push_tensor_value(&Matrix2::identity(), &j);
        assert_eq!(m, Matrix2::new(2.0, 0.0, 0.0, 0.5));
    }

    #[test]
    fn rotation_leaves_identity() {
        let (s, c) = 0.7f64.sin_cos();
        let j = Matrix2::new(c, -s, s, c);
        let m = push_tensor_value(&Matrix2::identity(), &j);
        assert!((m - Matrix2::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn identity_is_bitwise() {
        let mesh = build_disk_mesh(0.25).unwrap();
        let id: DiffeoRef = Arc::new(Identity);
        let t = TensorField::from_fn(&mesh, |p| Matrix2::new(1.0 + p.x * p.x, 0.1 * p.y, 0.1 * p.y, 2.0));
        let k = ScalarField::from_fn(&mesh, |p| 1.0 + p.y);
        assert_eq!(pushforward_tensor(&mesh, &t, &id).unwrap().values(), t.values());
        assert_eq!(pushforward_kappa(&mesh, &k, &id).unwrap().values(), k.values());
        assert_eq!(pushforward_source(&mesh, &k, &id).unwrap().values(), k.values());
    }

    #[test]
    fn scalar_rules() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let f: DiffeoRef = Arc::new(make_bump_diffeo(Point2::new(0.0, 0.1), 0.5, Point2::new(0.12, 0.0)).unwrap());
        let one = ScalarField::constant(&mesh, 1.0);
        let kt = pushforward_kappa(&mesh, &one, &f).unwrap();
        let st = pushforward_source(&mesh, &one, &f).unwrap();
        for (i, &y) in mesh.nodes().iter().enumerate() {
            let det = f.jacobian_det(f.inverse(y));
            assert!((kt.values()[i] - det).abs() < 1e-14);
            assert!((st.values()[i] * det - 1.0).abs() < 1e-14);
            if (y - Point2::new(0.0, 0.1)).norm() >= 0.5 {
                assert_eq!(kt.values()[i], 1.0);
            }
        }
    }
}
