use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use electrothermal::coefficients::ScalarCoefficient;
use electrothermal::elliptic::*;
use electrothermal::fem::{assemble_mass, assemble_stiffness};
use electrothermal::geometry::*;
use proptest::prelude::*;

fn mesh_010() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_disk_mesh(0.1).unwrap())
}

fn max_nodal_error(mesh: &Mesh, u: &VoltageField, exact: impl Fn(Point2) -> f64) -> f64 {
    u.values()
        .iter()
        .zip(mesh.nodes())
        .map(|(v, &p)| (v - exact(p)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn harmonic_quadratic_is_second_order() {
    let exact = |p: Point2| p.x * p.x - p.y * p.y;
    let mut consts = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mesh = build_disk_mesh(h).unwrap();
        let f = BoundaryData::from_fn(&mesh, "x2-y2", exact).unwrap();
        let u = solve_conductivity(&mesh, &TensorField::identity(&mesh), &f).unwrap();
        consts.push(max_nodal_error(&mesh, &u, exact) / (h * h));
    }
    let (lo, hi) = consts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    assert!(hi / lo < 2.0, "C(h) = {consts:?}");
}

#[test]
fn linear_flux_is_the_normal_component() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let f = BoundaryData::from_fn(&mesh, "x", |p| p.x).unwrap();
    let u = solve_conductivity(&mesh, &TensorField::identity(&mesh), &f).unwrap();
    let flux = dn_map(&mesh, &u);
    for (&b, v) in flux.nodes.iter().zip(&flux.values) {
        assert!((v - mesh.node(b).x).abs() < 0.01, "node {b}: {v}");
    }
    assert!(flux.integrate().abs() < 1e-10);
}

#[test]
fn constant_data_has_zero_flux() {
    let mesh = mesh_010();
    let u = solve_conductivity(mesh, &TensorField::identity(mesh), &BoundaryData::constant(mesh, 3.0)).unwrap();
    assert!(dn_map(mesh, &u).values.iter().all(|v| v.abs() < 1e-10));
    assert!(energy_form(mesh, &u).abs() < 1e-20);
    assert!(energy_density(mesh, &u).values().iter().all(|v| v.abs() < 1e-20));
}

#[test]
fn energy_of_linear_and_harmonic_traces() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let id = TensorField::identity(&mesh);
    let f = BoundaryData::from_fn(&mesh, "x", |p| p.x).unwrap();
    let q = energy_form(&mesh, &solve_conductivity(&mesh, &id, &f).unwrap());
    assert!((q - PI).abs() / PI < 2.0 * mesh.h_target().powi(2), "{q}");
    for n in 1..=4u32 {
        let u = solve_conductivity(&mesh, &id, &harmonic_trace(&mesh, n)).unwrap();
        let q = energy_form(&mesh, &u);
        let exact = harmonic_trace_energy(n);
        assert!((q - exact).abs() / exact < 0.01, "n = {n}: {q} vs {exact}");
    }
}

#[test]
fn harmonic_energy_error_is_second_order() {
    let err = |h: f64| {
        let mesh = build_disk_mesh(h).unwrap();
        let u = solve_conductivity(&mesh, &TensorField::identity(&mesh), &harmonic_trace(&mesh, 3)).unwrap();
        (energy_form(&mesh, &u) - harmonic_trace_energy(3)).abs()
    };
    let ratio = err(0.05) / err(0.025);
    assert!(ratio > 3.0, "ratio {ratio}");
}

#[test]
fn energy_density_integrates_to_energy() {
    let mesh = mesh_010();
    let gamma = TensorField::from_fn(mesh, |p| {
        nalgebra::Matrix2::new(2.0 + p.x, 0.3 * p.y, 0.3 * p.y, 1.5 - 0.5 * p.x)
    });
    let f = BoundaryData::from_fn(mesh, "mix", |p| p.x * p.y + (2.0 * p.x).sin()).unwrap();
    let u = solve_conductivity(mesh, &gamma, &f).unwrap();
    let q = energy_form(mesh, &u);
    let s = energy_density(mesh, &u);
    assert!((s.integrate(mesh) - q).abs() <= 1e-10 * q);
    assert!(s.values().iter().all(|&v| v >= 0.0));
}

#[test]
fn liouville_potential_examples() {
    let mesh = mesh_010();
    let q = liouville_potential(mesh, &ScalarCoefficient::one()).unwrap();
    assert!(q.values().iter().all(|&v| v == 0.0));
    let q = liouville_potential(mesh, &ScalarCoefficient::Exponential { alpha: 1.0 }).unwrap();
    assert!(q.values().iter().all(|v| (v - 0.25).abs() < 1e-13));
    let q = liouville_potential(mesh, &ScalarCoefficient::SquaredQuadratic { a: 1.0, b: 0.0 }).unwrap();
    for (v, p) in q.values().iter().zip(mesh.nodes()) {
        assert!((v - 2.0 / (1.0 + p.x * p.x)).abs() < 1e-12);
    }
    assert!(liouville_potential(mesh, &ScalarCoefficient::Constant { value: -1.0 }).is_err());
}

/// Largest `|∫∇w·∇φ + q w φ| / (‖∇w‖‖∇φ‖)` over smooth `φ` vanishing on the
/// circle, for `w = γ^{1/2} u`.
fn liouville_weak_residual(h: f64) -> f64 {
    let mesh = build_disk_mesh(h).unwrap();
    let coef = ScalarCoefficient::Exponential { alpha: 0.8 };
    let gamma = TensorField::isotropic(&ScalarField::from_coefficient(&mesh, &coef));
    let f = BoundaryData::from_fn(&mesh, "data", |p| p.x + 0.5 * p.y * p.y).unwrap();
    let u = solve_conductivity(&mesh, &gamma, &f).unwrap();
    let w: Vec<f64> = u
        .values()
        .iter()
        .zip(mesh.nodes())
        .map(|(v, &p)| coef.value(p).sqrt() * v)
        .collect();
    let q = liouville_potential(&mesh, &coef).unwrap();
    let qw: Vec<f64> = w.iter().zip(q.values()).map(|(a, b)| a * b).collect();
    let k = assemble_stiffness(&mesh, &TensorField::identity(&mesh));
    let kw = k.mul_vec(&w);
    let mqw = assemble_mass(&mesh, None).mul_vec(&qw);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let tests: [fn(Point2) -> f64; 4] = [|_| 1.0, |p| p.x, |p| p.y, |p| p.x * p.y];
    tests
        .iter()
        .map(|g| {
            let phi: Vec<f64> = mesh.nodes().iter().map(|&p| (1.0 - p.norm_squared()) * g(p)).collect();
            let res = dot(&phi, &kw) + dot(&phi, &mqw);
            res.abs() / (dot(&w, &kw).sqrt() * dot(&phi, &k.mul_vec(&phi)).sqrt())
        })
        .fold(0.0, f64::max)
}

#[test]
fn liouville_transform_residual_shrinks_under_refinement() {
    let coarse = liouville_weak_residual(0.1);
    let fine = liouville_weak_residual(0.05);
    assert!(fine < 0.4 * coarse, "{coarse:e} -> {fine:e}");
}

#[test]
fn energy_is_gauge_invariant_up_to_discretization() {
    let f: DiffeoRef = Arc::new(make_bump_diffeo(Point2::new(0.1, -0.1), 0.6, Point2::new(0.12, 0.08)).unwrap());
    let gap = |h: f64| {
        let mesh = build_disk_mesh(h).unwrap();
        let gamma = TensorField::from_coefficient(
            &mesh,
            &electrothermal::coefficients::TensorCoefficient::Radial { base: 1.0, eps: 0.5 },
        );
        let pushed = pushforward_tensor(&mesh, &gamma, &f).unwrap();
        let data = BoundaryData::from_fn(&mesh, "data", |p| p.x + p.x * p.y).unwrap();
        let a = energy_form(&mesh, &solve_conductivity(&mesh, &gamma, &data).unwrap());
        let b = energy_form(&mesh, &solve_conductivity(&mesh, &pushed, &data).unwrap());
        (a - b).abs() / a
    };
    let (coarse, fine) = (gap(0.1), gap(0.05));
    assert!(coarse < 0.02 && fine < coarse, "{coarse:e} -> {fine:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_maximum_principle(coeffs in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let mesh = mesh_010();
        let f = BoundaryData::from_fn(mesh, "random", |p| {
            let th = p.y.atan2(p.x);
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * ((j / 2 + 1) as f64 * th + if j % 2 == 0 { 0.0 } else { 1.0 }).cos())
                .sum()
        })
        .unwrap();
        let u = solve_conductivity(mesh, &TensorField::identity(mesh), &f).unwrap();
        let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in u.values() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn dn_map_is_symmetric(
        a in proptest::collection::vec(-1.0f64..1.0, 6),
        b in proptest::collection::vec(-1.0f64..1.0, 6),
        eps in 0.0f64..0.8,
    ) {
        let mesh = mesh_010();
        let gamma = TensorField::from_coefficient(
            mesh,
            &electrothermal::coefficients::TensorCoefficient::Radial { base: 1.0, eps },
        );
        let make = |c: &[f64]| {
            BoundaryData::from_fn(mesh, "f", |p| {
                let th = p.y.atan2(p.x);
                c.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * th).sin() + c * c * (j as f64 * th).cos()).sum()
            })
            .unwrap()
        };
        let (f, g) = (make(&a), make(&b));
        let problem = ConductivityProblem::new(mesh, &gamma).unwrap();
        let lf = dn_map(mesh, &problem.solve(mesh, &f).unwrap());
        let lg = dn_map(mesh, &problem.solve(mesh, &g).unwrap());
        let (x, y) = (lf.pair(&g), lg.pair(&f));
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
    }
}
