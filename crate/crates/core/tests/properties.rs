use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use proptest::prelude::*;
use warpflow_core::diagnostics::{
    arc_spacing, gradient_margins, lambda_estimate, ordering_margins, weighted_differences, MONITOR_TOL,
};
use warpflow_core::initial_data::{sausage_length, sausage_slice_in, Chart};
use warpflow_core::metric::{ricci_and_scalar, scalar_from_sectional, sectional_curvatures, validate_smoothness};
use warpflow_core::{Grid, Mesh, Profile, SchemeOrder};

fn grid(m: usize) -> Arc<Grid> {
    Arc::new(Grid::new(m, Mesh::Uniform, SchemeOrder::Fourth).unwrap())
}

/// A smooth invariant metric that is neither round nor a sausage:
/// `chi = rho(1 + c cos 2r)`, `psi = chi cos r (1 + a cos^2 r)`, `phi = chi sin r (1 + b sin^2 r)`.
fn bumpy(m: usize, n: usize, rho: f64, a: f64, b: f64, c: f64) -> Profile {
    let g = grid(m);
    let r = g.nodes().to_vec();
    let u = g.distance_to_tip().to_vec();
    let chi: Vec<f64> = r.iter().map(|&x| rho * (1.0 + c * (2.0 * x).cos())).collect();
    let psi: Vec<f64> = (0..m)
        .map(|i| {
            let cr = u[i].sin();
            chi[i] * cr * (1.0 + a * cr * cr)
        })
        .collect();
    let phi: Vec<f64> = (0..m)
        .map(|i| {
            let sr = r[i].sin();
            chi[i] * sr * (1.0 + b * sr * sr)
        })
        .collect();
    Profile::new(g, n, chi, psi, phi).unwrap()
}

/// Nodes needed for `ds <= 0.05` on a sausage slice, at least 401.
fn resolved_nodes(tau: f64) -> usize {
    let ell = sausage_length(tau).unwrap();
    ((ell / 0.05).ceil() as usize + 1).max(401)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scalar_curvature_is_the_ricci_trace(
        n in prop::sample::select(vec![3usize, 4, 5, 8]),
        rho in 0.2f64..5.0,
        a in -0.3f64..0.3,
        b in -0.3f64..0.3,
        c in -0.2f64..0.2,
    ) {
        let p = bumpy(201, n, rho, a, b, c);
        prop_assert!(validate_smoothness(&p, 1e-6).passed());
        let ric = ricci_and_scalar(&p).unwrap();
        let sec = sectional_curvatures(&p).unwrap();
        let from_sec = scalar_from_sectional(n, &sec);
        let scale = ric.scalar.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..201 {
            let trace = ric.rc11[i] + ric.rc22[i] + (n - 2) as f64 * ric.rc_ii[i];
            prop_assert!((trace - ric.scalar[i]).abs() <= 1e-13 * scale, "node {i}");
            prop_assert!((from_sec[i] - ric.scalar[i]).abs() <= 1e-9 * scale, "node {i}: {} vs {}", from_sec[i], ric.scalar[i]);
        }
    }

    #[test]
    fn sausage_slices_satisfy_the_curvature_orderings(
        tau in -50.0f64..-0.5,
        n in prop::sample::select(vec![3usize, 4, 5, 8]),
    ) {
        let m = resolved_nodes(tau);
        let p = sausage_slice_in(tau, n, &grid(m), Chart::for_tau(tau)).unwrap();
        let c = sectional_curvatures(&p).unwrap();
        let ds = arc_spacing(&p);
        for (k, (margin, node)) in ordering_margins(&c, &ds).into_iter().enumerate() {
            prop_assert!(margin >= -MONITOR_TOL, "ordering {k} at node {node}: {margin:e} (tau={tau}, N={m})");
        }
        for (k, (margin, node)) in gradient_margins(&c, &ds).into_iter().enumerate() {
            prop_assert!(margin >= -MONITOR_TOL, "gradient {k} at node {node}: {margin:e} (tau={tau}, N={m})");
        }
    }

    #[test]
    fn lambda_hat_scales_with_the_metric(tau in -20.0f64..-1.0, c in 0.25f64..4.0) {
        let p = sausage_slice_in(tau, 3, &grid(resolved_nodes(tau)), Chart::for_tau(tau)).unwrap();
        let l0 = lambda_estimate(&p).unwrap();
        let l1 = lambda_estimate(&p.scaled(c)).unwrap();
        prop_assert!((l1 / (c * l0) - 1.0).abs() < 1e-10, "{l0} {l1}");
    }

    #[test]
    fn weighted_differences_are_finite(
        n in prop::sample::select(vec![3usize, 4, 5, 8]),
        rho in 0.2f64..5.0,
        a in -0.3f64..0.3,
        b in -0.3f64..0.3,
        c in -0.2f64..0.2,
    ) {
        let p = bumpy(101, n, rho, a, b, c);
        let (x, y, z) = weighted_differences(&p).unwrap();
        for f in [&x, &y, &z] {
            prop_assert!(f.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn bumpy_profiles_meet_the_endpoint_conditions() {
    let p = bumpy(101, 4, 1.0, 0.2, -0.1, 0.1);
    assert!(validate_smoothness(&p, 1e-6).passed());
    assert!((p.chi()[0] - 1.1).abs() < 1e-15);
    assert!((p.grid().nodes()[100] - FRAC_PI_2).abs() < 1e-15);
}
