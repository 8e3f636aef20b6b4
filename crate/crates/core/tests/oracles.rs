use std::sync::Arc;

use warpflow_core::evolve::run;
use warpflow_core::initial_data::{round_sphere, sausage_slice_in, Chart};
use warpflow_core::verify::{
    bounds_audit, evolution_residuals, hypersausage_residual_ladder, oracle_error, residual_orders, CurvatureEquation,
    OracleConfig, RESIDUAL_CUT,
};
use warpflow_core::{Gauge, Grid, Mesh, RunConfig, SchemeOrder, TerminationReason};

fn grid(m: usize) -> Arc<Grid> {
    Arc::new(Grid::new(m, Mesh::Uniform, SchemeOrder::Fourth).unwrap())
}

fn to_extinction() -> RunConfig {
    RunConfig { imex: true, gauge: Gauge::ProportionalArcLength, monitor_every: 20, ..RunConfig::default() }
}

#[test]
fn hypersausage_ladder_converges_at_the_scheme_order() {
    let fourth = oracle_error(&OracleConfig::hypersausage()).unwrap();
    assert!(fourth.finest_error() < 1e-6, "{fourth:?}");
    assert!(fourth.min_order() > 3.8, "{fourth:?}");

    let second = oracle_error(&OracleConfig { order: SchemeOrder::Second, ..OracleConfig::hypersausage() }).unwrap();
    assert!(second.finest_error() < 1e-4, "{second:?}");
    assert!(second.min_order() > 1.8, "{second:?}");
}

#[test]
fn round_sphere_follows_its_radius() {
    let cfg = OracleConfig { nodes: vec![51, 101], ..OracleConfig::round_sphere(4) };
    let table = oracle_error(&cfg).unwrap();
    assert!(table.finest_error() < 1e-8, "{table:?}");
}

#[test]
fn round_sphere_extinction_time() {
    let p = round_sphere(1.0, &grid(401), 3).unwrap();
    let traj = run(p, to_extinction()).unwrap();
    assert_eq!(traj.termination_reason, TerminationReason::Extinction);
    let t = traj.extinction_time.unwrap();
    assert!((t / 0.25 - 1.0).abs() < 1e-3, "T = {t}");
}

#[test]
fn curvature_equations_hold_along_the_hypersausage() {
    let ladder = hypersausage_residual_ladder(&[101, 201, 401], &CurvatureEquation::ALL, RESIDUAL_CUT).unwrap();
    let orders = residual_orders(&ladder);
    assert!(orders.iter().all(|&q| q >= 1.8), "{orders:?}");
    for (m, table) in &ladder {
        for row in &table.rows {
            assert!(row.max_residual < 1e-2 * row.rhs_scale.max(1.0), "N={m} {row:?}");
        }
    }
}

#[test]
fn curvature_equations_hold_on_a_sausage_in_four_dimensions() {
    let mut worst = Vec::new();
    for m in [101usize, 201] {
        let p = sausage_slice_in(-1.5, 4, &grid(m), Chart::ArcLength).unwrap();
        let dt = warpflow_core::evolve::adaptive_dt(&p, 0.9).unwrap();
        let cfg = RunConfig {
            gauge: Gauge::ProportionalArcLength,
            t_end: Some(0.1),
            monitor_every: (0.01 / dt).round() as u64,
            snapshot_every: 1,
            ..RunConfig::default()
        };
        let traj = run(p, cfg).unwrap();
        let table = evolution_residuals(&traj, &CurvatureEquation::ALL, RESIDUAL_CUT).unwrap();
        worst.push(table.max_residual());
    }
    assert!(worst[1] < worst[0] / 8.0, "{worst:?}");
}

#[test]
fn sausage_run_respects_the_a_priori_bounds() {
    let tau = -5.0;
    let p = sausage_slice_in(tau, 3, &grid(401), Chart::for_tau(tau)).unwrap();
    let traj = run(p, to_extinction()).unwrap();
    assert_eq!(traj.termination_reason, TerminationReason::Extinction, "{:?}", traj.diagnostic);
    let report = bounds_audit(&traj, tau).unwrap();
    for check in &report.checks {
        assert!(check.passed, "{check:?}");
    }
}
