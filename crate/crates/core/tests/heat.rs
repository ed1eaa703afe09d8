use std::sync::{Arc, OnceLock};

use electrothermal::elliptic::{energy_density, solve_conductivity, BoundaryData};
use electrothermal::geometry::*;
use electrothermal::heat::*;
use electrothermal::special::J0_FIRST_ZERO;
use proptest::prelude::*;

fn mesh_010() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| build_disk_mesh(0.1).unwrap())
}

fn unit_operator(mesh: &Mesh) -> Arc<HeatOperator> {
    Arc::new(HeatOperator::new(mesh, &ScalarField::constant(mesh, 1.0), &TensorField::identity(mesh)).unwrap())
}

/// `‖a − b‖_M / ‖b‖_M` with the unit mass matrix.
fn rel_l2(op: &HeatOperator, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let md = op.unit_mass.mul_vec(&d);
    let mb = op.unit_mass.mul_vec(b);
    let num: f64 = d.iter().zip(&md).map(|(x, y)| x * y).sum();
    let den: f64 = b.iter().zip(&mb).map(|(x, y)| x * y).sum();
    (num / den).sqrt()
}

fn kappa_norm(op: &HeatOperator, v: &[f64]) -> f64 {
    let mv = op.mass.mul_vec(v);
    v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>().sqrt()
}

#[test]
fn first_eigenvalue_matches_bessel_zero() {
    let mesh = build_disk_mesh(0.025).unwrap();
    let eig = eigen_from_operator(unit_operator(&mesh), 8).unwrap();
    let exact = J0_FIRST_ZERO * J0_FIRST_ZERO;
    assert!((eig.values[0] - exact).abs() / exact < 0.01, "{}", eig.values[0]);
    assert!(eig.values.iter().all(|&l| l > 0.0));
    assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn eigen_contract_at_default_modes() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let kappa = ScalarField::from_fn(&mesh, |p| 1.0 + 0.3 * p.x);
    let thermal = TensorField::from_fn(&mesh, |p| nalgebra::Matrix2::new(1.0 + 0.2 * p.y, 0.1, 0.1, 0.8));
    let eig = assemble_weighted_eigen(&mesh, &kappa, &thermal, DEFAULT_MODES).unwrap();
    assert!(eig.orthonormality_defect() <= 1e-8, "{:e}", eig.orthonormality_defect());
    assert!(eig.worst_residual <= 1e-8, "{:e}", eig.worst_residual);
}

#[test]
fn doubling_kappa_doubles_the_spectrum() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let kappa = ScalarField::from_fn(&mesh, |p| 1.0 + 0.5 * p.y * p.y);
    let thermal = TensorField::identity(&mesh);
    let a = assemble_weighted_eigen(&mesh, &kappa, &thermal, 12).unwrap();
    let b = assemble_weighted_eigen(&mesh, &kappa.scaled(2.0), &thermal, 12).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((y - 2.0 * x).abs() <= 1e-8 * 2.0 * x, "{x} {y}");
    }
    // Halving the κ⁻¹ mass rescales the normalized modes by √2.
    let (pa, pb) = (a.mode(0), b.mode(0));
    for (x, y) in pa.iter().zip(&pb) {
        assert!((y - 2f64.sqrt() * x).abs() < 1e-6);
    }
}

#[test]
fn static_solution_oracle_and_flux() {
    let mut errs = Vec::new();
    for h in [0.1, 0.05] {
        let mesh = build_disk_mesh(h).unwrap();
        let one = ScalarField::constant(&mesh, 1.0);
        let psi = solve_static_heat(&mesh, &TensorField::identity(&mesh), &one).unwrap();
        let err = psi
            .iter()
            .zip(mesh.nodes())
            .map(|(v, p)| (v - (1.0 - p.norm_squared()) / 4.0).abs())
            .fold(0.0, f64::max);
        errs.push(err);
        let op = unit_operator(&mesh);
        let flux = boundary_heat_flux_static(&mesh, &op, &psi, one.values());
        if h <= 0.05 {
            for v in &flux.values {
                assert!((v + 0.5).abs() <= 0.005, "flux {v}");
            }
        }
        let total = flux.integrate();
        let source = one.integrate(&mesh);
        assert!((total + source).abs() <= 0.01 * source);
    }
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn static_sum_rule_for_joule_source() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let gamma = TensorField::from_fn(&mesh, |p| nalgebra::Matrix2::identity() * (1.0 + 0.5 * p.x * p.x));
    let f = BoundaryData::from_fn(&mesh, "f", |p| p.x + p.y * p.y).unwrap();
    let s = energy_density(&mesh, &solve_conductivity(&mesh, &gamma, &f).unwrap());
    let thermal = TensorField::from_fn(&mesh, |p| nalgebra::Matrix2::new(1.2, 0.1 * p.x, 0.1 * p.x, 0.9));
    let op = HeatOperator::new(&mesh, &ScalarField::constant(&mesh, 1.0), &thermal).unwrap();
    let psi = op.static_solution(s.values());
    let total = boundary_heat_flux_static(&mesh, &op, &psi, s.values()).integrate();
    let source = s.integrate(&mesh);
    assert!((total + source).abs() <= 0.01 * source, "{total} vs {source}");
}

#[test]
fn zero_source_gives_zero_temperature_and_flux() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let grid = TimeGrid::new(0.01, 5).unwrap();
    let zero = SourceHistory::Static(ScalarField::constant(mesh, 0.0));
    let psi = solve_transient_timestep(mesh, &op, &zero, &grid, 0.5).unwrap();
    assert!(psi.values.iter().flatten().all(|&v| v == 0.0));
    let flux = boundary_heat_flux(mesh, &op, &psi, &zero).unwrap();
    assert!(flux.traces.iter().flat_map(|t| &t.values).all(|&v| v == 0.0));
    let eig = eigen_from_operator(op.clone(), 16).unwrap();
    let psi = solve_transient_eigen(mesh, &eig, &zero, &grid).unwrap();
    assert!(psi.values.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn temperature_contract_holds() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let grid = TimeGrid::uniform(0.05, 0.005).unwrap();
    let src = SourceHistory::Static(ScalarField::from_fn(mesh, |p| 1.0 + p.x));
    let eig = eigen_from_operator(op.clone(), 32).unwrap();
    for psi in [
        solve_transient_timestep(mesh, &op, &src, &grid, 1.0).unwrap(),
        solve_transient_eigen(mesh, &eig, &src, &grid).unwrap(),
    ] {
        assert!(psi.at(0).iter().all(|&v| v == 0.0));
        for j in 0..grid.len() {
            for &b in mesh.boundary_nodes() {
                assert_eq!(psi.at(j)[b], 0.0);
            }
        }
    }
}

#[test]
fn long_time_eigen_solution_approaches_static() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let op = unit_operator(&mesh);
    let one = ScalarField::constant(&mesh, 1.0);
    let psi0 = op.static_solution(one.values());
    let eig = eigen_from_operator(op.clone(), DEFAULT_MODES).unwrap();
    let grid = TimeGrid::uniform(0.5, 0.01).unwrap();
    let psi = solve_transient_eigen(&mesh, &eig, &SourceHistory::Static(one), &grid).unwrap();
    for j in [10, 25, 50] {
        let t = grid.time(j);
        let d: Vec<f64> = psi.at(j).iter().zip(&psi0).map(|(a, b)| a - b).collect();
        let bound = (-eig.values[0] * t).exp() * kappa_norm(&op, &psi0);
        assert!(kappa_norm(&op, &d) <= bound * (1.0 + 1e-9), "t = {t}");
    }
}

#[test]
fn transient_part_is_monotone_for_static_sources() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let s = ScalarField::from_fn(mesh, |p| (1.0 + p.x).powi(2));
    let psi0 = op.static_solution(s.values());
    let eig = eigen_from_operator(op.clone(), DEFAULT_MODES).unwrap();
    let grid = TimeGrid::uniform(0.3, 0.01).unwrap();
    let psi = solve_transient_eigen(mesh, &eig, &SourceHistory::Static(s), &grid).unwrap();
    let norms: Vec<f64> = psi
        .values
        .iter()
        .map(|v| kappa_norm(&op, &v.iter().zip(&psi0).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn eigen_and_crank_nicolson_agree() {
    let mesh = build_disk_mesh(0.05).unwrap();
    let op = unit_operator(&mesh);
    let eig = eigen_from_operator(op.clone(), DEFAULT_MODES).unwrap();
    let grid = TimeGrid::uniform(0.1, 1e-3).unwrap();
    let f = BoundaryData::from_fn(&mesh, "x", |p| p.x + 0.5 * p.x * p.y).unwrap();
    let joule = energy_density(&mesh, &solve_conductivity(&mesh, &TensorField::identity(&mesh), &f).unwrap());
    for s in [ScalarField::constant(&mesh, 1.0), joule] {
        let src = SourceHistory::Static(s);
        let a = solve_transient_eigen(&mesh, &eig, &src, &grid).unwrap();
        let b = solve_transient_timestep(&mesh, &op, &src, &grid, 0.5).unwrap();
        let d = rel_l2(&op, b.last(), a.last());
        assert!(d <= 1e-3, "{d:e}");
    }
}

#[test]
fn crank_nicolson_is_second_order_in_time() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let eig = eigen_from_operator(op.clone(), op.n_interior().min(200)).unwrap();
    let w = ScalarField::from_fn(mesh, |p| 1.0 - p.norm_squared());
    let err = |dt: f64| {
        let grid = TimeGrid::uniform(0.2, dt).unwrap();
        let g: Vec<f64> = grid.times().iter().map(|t| (5.0 * t).sin()).collect();
        let src = SourceHistory::Separable { w: w.clone(), g };
        let a = solve_transient_eigen(mesh, &eig, &src, &grid).unwrap();
        let b = solve_transient_timestep(mesh, &op, &src, &grid, 0.5).unwrap();
        rel_l2(&op, b.last(), a.last())
    };
    let ratio = err(0.01) / err(0.005);
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn backward_euler_energy_balance_improves_with_dt() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let w = ScalarField::from_fn(mesh, |p| 2.0 + p.x);
    let imbalance = |dt: f64| {
        let grid = TimeGrid::uniform(0.1, dt).unwrap();
        let g: Vec<f64> = grid.times().iter().map(|t| -(-t / 0.03f64).exp_m1()).collect();
        let src = SourceHistory::Separable { w: w.clone(), g };
        let psi = solve_transient_timestep(mesh, &op, &src, &grid, 1.0).unwrap();
        let flux = boundary_heat_flux(mesh, &op, &psi, &src).unwrap().integrated();
        let ones = vec![1.0; mesh.n_nodes()];
        let mut worst = 0.0f64;
        for j in 1..grid.len() - 1 {
            let dpsi = psi.time_derivative(j).unwrap();
            let stored: f64 = op.mass.mul_vec(&dpsi).iter().sum();
            let supplied: f64 = op.unit_mass.mul_vec(&src.at(j)).iter().zip(&ones).map(|(a, b)| a * b).sum();
            worst = worst.max((stored - flux[j] - supplied).abs() / w.integrate(mesh));
        }
        worst
    };
    let (coarse, fine) = (imbalance(0.004), imbalance(0.002));
    assert!(fine < 0.6 * coarse, "{coarse:e} -> {fine:e}");
}

#[test]
fn doubling_modes_changes_little() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let s = ScalarField::from_fn(mesh, |p| 1.0 + p.y);
    let psi0 = op.static_solution(s.values());
    let grid = TimeGrid::uniform(0.05, 0.005).unwrap();
    let src = SourceHistory::Static(s);
    let small = eigen_from_operator(op.clone(), 32).unwrap();
    let large = eigen_from_operator(op.clone(), 64).unwrap();
    let a = solve_transient_eigen(mesh, &small, &src, &grid).unwrap();
    let b = solve_transient_eigen(mesh, &large, &src, &grid).unwrap();
    let d: Vec<f64> = a.last().iter().zip(b.last()).map(|(x, y)| x - y).collect();
    let bound = (-large.values[32] * grid.t_final()).exp() * kappa_norm(&op, &psi0);
    assert!(kappa_norm(&op, &d) <= bound, "{:e} > {bound:e}", kappa_norm(&op, &d));
}

#[test]
fn single_sample_history_has_no_transient_flux() {
    let mesh = mesh_010();
    let op = unit_operator(mesh);
    let grid = TimeGrid::new(0.01, 0).unwrap();
    let src = SourceHistory::Static(ScalarField::constant(mesh, 1.0));
    let psi = solve_transient_timestep(mesh, &op, &src, &grid, 1.0).unwrap();
    assert!(boundary_heat_flux(mesh, &op, &psi, &src).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn static_solution_is_linear(alpha in -5.0f64..5.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let mesh = mesh_010();
        let thermal = TensorField::identity(mesh);
        let s = ScalarField::from_fn(mesh, move |p| 1.0 + a * p.x + b * p.y * p.x);
        let base = solve_static_heat(mesh, &thermal, &s).unwrap();
        let scaled = solve_static_heat(mesh, &thermal, &s.scaled(alpha)).unwrap();
        let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in base.iter().zip(&scaled) {
            prop_assert!((alpha * x - y).abs() <= 1e-12 * scale.max(1.0) * alpha.abs().max(1.0));
        }
    }
}
