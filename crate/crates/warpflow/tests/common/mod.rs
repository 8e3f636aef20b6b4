#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use warpflow_core::{Grid, Mesh, Profile, SchemeOrder};

/// A smooth invariant metric on an arbitrary mesh:
/// `chi = rho(1 + c cos 2r)`, `psi = chi cos r (1 + a cos^2 r)`, `phi = chi sin r (1 + b sin^2 r)`.
pub fn bumpy(grid: Arc<Grid>, n: usize, rho: f64, a: f64, b: f64, c: f64) -> Profile {
    let m = grid.node_count();
    let r = grid.nodes().to_vec();
    let u = grid.distance_to_tip().to_vec();
    let chi: Vec<f64> = r.iter().map(|&x| rho * (1.0 + c * (2.0 * x).cos())).collect();
    let psi = (0..m).map(|i| chi[i] * u[i].sin() * (1.0 + a * u[i].sin().powi(2))).collect();
    let phi = (0..m).map(|i| chi[i] * r[i].sin() * (1.0 + b * r[i].sin().powi(2))).collect();
    Profile::new(grid, n, chi, psi, phi).unwrap()
}

pub fn profiles() -> impl Strategy<Value = Profile> {
    (
        prop::sample::select(vec![3usize, 4, 5, 8]),
        21usize..402,
        prop_oneof![Just(None), (0.0f64..0.9).prop_map(Some)],
        prop::bool::ANY,
        0.05f64..20.0,
        -0.3f64..0.3,
        -0.3f64..0.3,
        -0.2f64..0.2,
    )
        .prop_map(|(n, m, strength, fourth, rho, a, b, c)| {
            let mesh = strength.map_or(Mesh::Uniform, |strength| Mesh::Stretched { strength });
            let order = if fourth { SchemeOrder::Fourth } else { SchemeOrder::Second };
            bumpy(Arc::new(Grid::new(m, mesh, order).unwrap()), n, rho, a, b, c)
        })
}

pub fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn profiles_identical(p: &Profile, q: &Profile) -> bool {
    p.dimension() == q.dimension()
        && p.grid() == q.grid()
        && same_bits(p.chi(), q.chi())
        && same_bits(p.psi(), q.psi())
        && same_bits(p.phi(), q.phi())
}
