mod common;

use common::*;
use fractalflux::energy::*;
use fractalflux::measure::arc_length_measure;
use fractalflux::mesh::{triangulate, MeshMode, Side, TwoSidedMesh};
use fractalflux::solver::*;

fn flat_setup(h: f64, lambda: Lambda, t: f64, dt: f64) -> (TwoSidedMesh, TransmissionProblem) {
    let d = flat();
    let mesh = triangulate(&d, h, MeshMode::StructuredGridAligned).unwrap();
    let p = TransmissionProblem::new(arc_length_measure(d.interface.clone()), LambdaSpec::Uniform(lambda), t, dt);
    (mesh, p)
}

fn indicator(mesh: &TwoSidedMesh) -> Vec<f64> {
    initial_state(mesh, &InitialCondition::IndicatorPlus)
}

fn frozen(mesh: &TwoSidedMesh, p: &TransmissionProblem, u: Vec<f64>, n: usize) -> SolutionTrajectory {
    let times: Vec<f64> = (0..=n).map(|k| p.t_final * k as f64 / n as f64).collect();
    SolutionTrajectory::from_fields(mesh, p, times, vec![u; n + 1]).unwrap()
}

#[test]
fn zero_trajectory_has_zero_energy() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(1.0), 1.0, 0.1);
    let t = frozen(&m, &p, vec![0.0; m.n_vertices()], 4);
    let r = j_t_energy(&t, Quadrature::Trapezoid).unwrap();
    assert_eq!((r.grad_term, r.l2_term, r.boundary_term, r.total), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn frozen_indicator_closed_form() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(1.0), 2.0, 0.1);
    let t = frozen(&m, &p, indicator(&m), 8);
    for q in [Quadrature::Trapezoid, Quadrature::LeftRect] {
        let r = j_t_energy(&t, q).unwrap();
        assert!(r.grad_term.abs() < 1e-12);
        assert!((r.l2_term - 1.0).abs() < 1e-12);
        assert!((r.boundary_term - 2.0).abs() < 1e-12);
        assert!((r.total - 3.0).abs() < 1e-12);
        assert_eq!(r.total, r.grad_term + r.l2_term + r.boundary_term);
        assert_eq!(r.n_time_nodes, 9);
    }
}

#[test]
fn energy_is_quadratic() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(2.0), 0.05, 0.005);
    let sol = solve_trajectory(&m, &p).unwrap();
    let fields: Vec<Vec<f64>> = sol.snapshots.iter().map(|s| s.values.clone()).collect();
    let times: Vec<f64> = sol.snapshots.iter().map(|s| s.time).collect();
    let base = {
        let t = SolutionTrajectory::from_fields(&m, &p, times.clone(), fields.clone()).unwrap();
        j_t_energy(&t, Quadrature::Trapezoid).unwrap().total
    };
    for a in [0.0, 1.0, 2.0, -1.0] {
        let scaled: Vec<Vec<f64>> = fields.iter().map(|u| u.iter().map(|v| a * v).collect()).collect();
        let t = SolutionTrajectory::from_fields(&m, &p, times.clone(), scaled).unwrap();
        let e = j_t_energy(&t, Quadrature::Trapezoid).unwrap().total;
        assert!((e - a * a * base).abs() <= 1e-12 * base.max(1.0));
    }
}

#[test]
fn insulated_run_has_frozen_energy() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(0.0), 0.5, 0.05);
    let d = flat();
    let j = script_j(&d, &p, &MeshParams { h: 0.125, mode: None }).unwrap();
    assert!((j - 0.5 * 0.5).abs() < 1e-10, "{j}");
    let t = solve_trajectory(&m, &p).unwrap();
    assert_eq!(j_t_energy(&t, Quadrature::Trapezoid).unwrap().boundary_term, 0.0);
}

#[test]
fn coupling_lowers_energy_below_frozen_value() {
    let d = flat();
    let mp = MeshParams { h: 1.0 / 16.0, mode: None };
    let (_, p1) = flat_setup(mp.h, Lambda::Finite(1.0), 0.2, 0.01);
    let (_, p0) = flat_setup(mp.h, Lambda::Finite(0.0), 0.2, 0.01);
    let (r1, _) = evaluate_shape(&d, &p1, &mp).unwrap();
    let (r0, _) = evaluate_shape(&d, &p0, &mp).unwrap();
    let frozen_value = 0.2 * 0.5 + 0.2 * 1.0;
    assert!(r1.total < frozen_value);
    assert!(r1.l2_term < r0.l2_term);
}

#[test]
fn merged_interface_has_no_boundary_term() {
    let (m, p) = flat_setup(0.125, Lambda::Infinite, 0.05, 0.005);
    let t = solve_trajectory(&m, &p).unwrap();
    assert_eq!(j_t_energy(&t, Quadrature::Trapezoid).unwrap().boundary_term, 0.0);
}

#[test]
fn time_quadrature_is_first_order() {
    let mut totals = Vec::new();
    for dt in [0.004, 0.002, 0.001] {
        let (m, p) = flat_setup(1.0 / 16.0, Lambda::Finite(5.0), 0.04, dt);
        let t = solve_trajectory(&m, &p).unwrap();
        totals.push(j_t_energy(&t, Quadrature::Trapezoid).unwrap().total);
    }
    let d1 = (totals[0] - totals[1]).abs();
    let d2 = (totals[1] - totals[2]).abs();
    let rate = (d1 / d2).log2();
    assert!((0.7..=1.5).contains(&rate), "{totals:?} {rate}");
}

#[test]
fn heat_content_properties() {
    let (m, p) = flat_setup(1.0 / 16.0, Lambda::Finite(2.0), 0.05, 0.005);
    let t = solve_trajectory(&m, &p).unwrap();
    assert!((heat_content(&t, Side::Plus, 0.0).unwrap() - 0.5).abs() < 1e-14);
    assert_eq!(heat_content(&t, Side::Minus, 0.0).unwrap(), 0.0);
    for k in 0..=10 {
        let s = 0.005 * k as f64 + 0.001;
        let s = s.min(0.05);
        let total = heat_content(&t, Side::Plus, s).unwrap() + heat_content(&t, Side::Minus, s).unwrap();
        assert!((total - 0.5).abs() < 1e-10);
    }
    assert!(heat_content(&t, Side::Minus, 0.01).unwrap() > 0.0);
    assert!(heat_content(&t, Side::Minus, 0.06).is_err());
    let c = transfer_curve(&t);
    assert_eq!(c[0].1, 0.0);
    assert!(c.windows(2).all(|w| w[1].1 >= w[0].1));
}

#[test]
fn insulated_transfer_curve_is_zero() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(0.0), 0.05, 0.005);
    let t = solve_trajectory(&m, &p).unwrap();
    assert!(transfer_curve(&t).iter().all(|&(_, q)| q == 0.0));
}

#[test]
fn energy_csv_layout() {
    let (m, p) = flat_setup(0.125, Lambda::Finite(1.0), 2.0, 0.1);
    let r = j_t_energy(&frozen(&m, &p, indicator(&m), 2), Quadrature::Trapezoid).unwrap();
    let meta = EnergyMeta { dt: 1.0, h: 0.125, generation: 0, lambda_summary: "1".into() };
    let mut buf = Vec::new();
    write_energy_csv(&[(r, meta)], &["x".into()], &mut buf).unwrap();
    let s = String::from_utf8(buf).unwrap();
    assert!(s.lines().nth(1).unwrap().starts_with("grad_term,l2_term,boundary_term,total,T,dt,h"));
    assert_eq!(s.lines().count(), 3);
}
