use std::sync::{Arc, OnceLock};

use electrothermal::cgo::{DecayProbeOptions, PotentialField, SpectralGrid, DEFAULT_K_SWEEP};
use electrothermal::coefficients::TensorCoefficient;
use electrothermal::density::*;
use electrothermal::geometry::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn mesh_010() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_disk_mesh(0.1).unwrap())
}

fn mesh_005() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_disk_mesh(0.05).unwrap())
}

fn families_010() -> &'static Vec<ProductFamily> {
    static FAMS: OnceLock<Vec<ProductFamily>> = OnceLock::new();
    FAMS.get_or_init(|| {
        let mesh = mesh_010();
        (0..=10).map(|m| build_family(mesh, &TensorField::identity(mesh), m).unwrap()).collect()
    })
}

fn targets(mesh: &Mesh) -> Vec<(&'static str, ScalarField)> {
    vec![
        ("r2", ScalarField::from_fn(mesh, |p| p.norm_squared())),
        ("x", ScalarField::from_fn(mesh, |p| p.x)),
        ("exp", ScalarField::from_fn(mesh, |p| (p.x - 0.5 * p.y).exp())),
        ("gauss", ScalarField::from_fn(mesh, |p| (-4.0 * (p - Point2::new(0.2, 0.1)).norm_squared()).exp())),
        ("halfdisk", ScalarField::from_fn(mesh, |p| if p.x > 0.0 { 1.0 } else { 0.0 })),
    ]
}

#[test]
fn family_members_are_reproduced() {
    let mesh = mesh_005();
    for gamma in [
        TensorField::identity(mesh),
        TensorField::from_coefficient(mesh, &TensorCoefficient::Radial { base: 1.0, eps: 0.5 }),
    ] {
        let fam = build_family(mesh, &gamma, 8).unwrap();
        for &(i, j) in &[(1, 1), (1, 2), (3, 8), (6, 14), (16, 16), (9, 12)] {
            let b = fam.product(i, j).unwrap();
            let r = projection_residual(mesh, b, &fam).unwrap();
            assert!(r <= 1e-6, "B_{i}{j}: {r:e}");
        }
    }
}

#[test]
fn gram_matrix_is_psd_and_diagonal_products_nonnegative() {
    let mesh = mesh_010();
    let gamma = TensorField::from_coefficient(mesh, &TensorCoefficient::Twisted { l1: 1.5, l2: 0.8, twist: 0.25 });
    let fam = build_family(mesh, &gamma, 10).unwrap();
    let g = fam.gram();
    assert!((g - g.transpose()).norm() <= 1e-14 * g.norm());
    assert!(fam.gram_eigenvalues()[0] >= -1e-10);
    assert!(fam.min_diagonal_product() >= 0.0);
    assert_eq!(fam.len(), 21 * 22 / 2);
}

#[test]
fn quadratic_target_at_m8() {
    let mesh = mesh_005();
    let fam = build_family(mesh, &TensorField::identity(mesh), 8).unwrap();
    let r = projection_residual(mesh, &ScalarField::from_fn(mesh, |p| p.norm_squared()), &fam).unwrap();
    assert!(r <= 0.05, "{r}");
}

#[test]
fn residuals_shrink_as_the_family_grows() {
    let mesh = mesh_010();
    for (name, t) in targets(mesh) {
        let res: Vec<f64> = families_010().iter().map(|f| projection_residual(mesh, &t, f).unwrap()).collect();
        assert!(res.last().unwrap() < &res[1], "{name}: {res:?}");
    }
}

/// Residual of the pushed target `t∘F⁻¹/J̃` against the pushed family, in the
/// product weighted by `J̃ = |DF|∘F⁻¹`.
fn pushed_residual(mesh: &Mesh, f: &DiffeoRef, target: &ScalarField, m: usize) -> f64 {
    let pushed = pushforward_tensor(mesh, &TensorField::identity(mesh), f).unwrap();
    let fam = build_family(mesh, &pushed, m).unwrap();
    let t = pushforward_source(mesh, target, f).unwrap();
    let w: Vec<f64> = (0..mesh.n_triangles()).map(|k| f.jacobian_det(f.inverse(mesh.centroid(k)))).collect();
    projection_residual_weighted(mesh, &t, &fam, &w).unwrap()
}

#[test]
fn residuals_are_gauge_covariant() {
    let f: DiffeoRef = Arc::new(make_bump_diffeo(Point2::new(0.1, -0.1), 0.6, Point2::new(0.12, 0.08)).unwrap());
    let gaps = |mesh: &Mesh| -> Vec<f64> {
        let fam = build_family(mesh, &TensorField::identity(mesh), 8).unwrap();
        targets(mesh)
            .iter()
            .map(|(_, t)| {
                let base = projection_residual(mesh, t, &fam).unwrap();
                (base - pushed_residual(mesh, &f, t, 8)).abs()
            })
            .collect()
    };
    let coarse = gaps(mesh_010());
    let fine = gaps(mesh_005());
    for (k, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        assert!(*f < 0.02, "target {k}: {coarse:?} -> {fine:?}");
        if k < 4 {
            assert!(f < c, "target {k}: {coarse:?} -> {fine:?}");
        }
    }
}

#[test]
fn orthogonalized_half_disk_is_certified() {
    let mesh = mesh_005();
    let fam = build_family(mesh, &TensorField::identity(mesh), 8).unwrap();
    let grid = SpectralGrid::new(2.0, 128).unwrap();
    let pot = PotentialField::zero(&grid);
    let seed = ScalarField::from_fn(mesh, |p| if p.x > 0.0 { 1.0 } else { 0.0 });
    let ks: Vec<Complex64> = DEFAULT_K_SWEEP.iter().map(|&k| Complex64::new(0.6 * k, 0.8 * k)).collect();
    let opts = DecayProbeOptions { direct_only: true, ..Default::default() };
    let out = orthogonalized_decay(mesh, &fam, &seed, &grid, &pot, &ks, &opts).unwrap();
    assert!(!out.degenerate);
    assert!(out.orthogonality_defect <= 1e-8, "{:e}", out.orthogonality_defect);
    assert!(out.norm_ratio > 0.0 && out.norm_ratio < 1.0);
    let orth = out.orthogonalized.as_ref().unwrap();
    assert_eq!(orth.rows.len(), ks.len());
    let gap = out.exponent_gap.unwrap();
    assert!((gap - (out.seed.decay_exponent - orth.decay_exponent)).abs() < 1e-15);
}

#[test]
fn trivial_family_leaves_the_seed_unchanged() {
    let mesh = mesh_010();
    let fam = &families_010()[0];
    let grid = SpectralGrid::new(2.0, 128).unwrap();
    let pot = PotentialField::zero(&grid);
    let seed = ScalarField::from_fn(mesh, |p| 1.0 + p.x * p.y);
    let ks = [Complex64::new(10.0, 0.0), Complex64::new(20.0, 0.0), Complex64::new(40.0, 0.0)];
    let opts = DecayProbeOptions { direct_only: true, n_radial: 32, n_angular: 128, ..Default::default() };
    let out = orthogonalized_decay(mesh, fam, &seed, &grid, &pot, &ks, &opts).unwrap();
    assert_eq!(out.exponent_gap, Some(0.0));
    assert_eq!(out.norm_ratio, 1.0);
}

#[test]
fn seed_in_the_span_is_degenerate() {
    let mesh = mesh_010();
    let fam = &families_010()[1];
    let grid = SpectralGrid::new(2.0, 128).unwrap();
    let pot = PotentialField::zero(&grid);
    let seed = fam.product(1, 1).unwrap().clone();
    let opts = DecayProbeOptions { direct_only: true, n_radial: 16, n_angular: 64, ..Default::default() };
    let out = orthogonalized_decay(mesh, fam, &seed, &grid, &pot, &[Complex64::new(10.0, 0.0)], &opts).unwrap();
    assert!(out.degenerate);
    assert!(out.orthogonalized.is_none() && out.exponent_gap.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nested_families_have_nonincreasing_residuals(m in 0usize..10, which in 0usize..5) {
        let mesh = mesh_010();
        let (_, t) = &targets(mesh)[which];
        let fams = families_010();
        let a = projection_residual(mesh, t, &fams[m]).unwrap();
        let b = projection_residual(mesh, t, &fams[m + 1]).unwrap();
        prop_assert!(b <= a + 1e-10, "M = {}: {} -> {}", m, a, b);
    }

    #[test]
    fn members_of_small_families_are_in_the_span(m in 1usize..6, i in 0usize..13, j in 0usize..13) {
        let mesh = mesh_010();
        let fam = &families_010()[m];
        let n = 2 * m + 1;
        let (i, j) = (i % n, j % n);
        let b = fam.product(i.min(j), i.max(j)).unwrap();
        prop_assert!(projection_residual(mesh, b, fam).unwrap() <= 1e-6);
    }
}
