//! Mesh on `[0, pi/2]`, parity-aware finite differences and quadrature.
//!
//! The mesh is the image of a uniform computational mesh `x_j = j/(N-1)` under
//! a map `r = R(x)` that is odd about both `x = 0` and `x = 1`. Odd symmetry of
//! the map means a function that is even (or odd) about an endpoint in `r` is
//! also even (or odd) in `x`, so ghost values beyond either endpoint are
//! reflections of interior values with the declared sign.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, data, Result};
use crate::math::{abs, cos, max_abs, sin, FRAC_PI_2, PI};

/// Minimum number of mesh nodes accepted by [`Grid::new`].
pub const MIN_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Parity of a sampled function at the waist (`r = 0`) and at the tip (`r = pi/2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParityPair {
    pub waist: Parity,
    pub tip: Parity,
}

impl ParityPair {
    pub const EVEN: ParityPair = ParityPair { waist: Parity::Even, tip: Parity::Even };
    pub const ODD: ParityPair = ParityPair { waist: Parity::Odd, tip: Parity::Odd };
    pub const CHI: ParityPair = ParityPair::EVEN;
    pub const PSI: ParityPair = ParityPair { waist: Parity::Even, tip: Parity::Odd };
    pub const PHI: ParityPair = ParityPair { waist: Parity::Odd, tip: Parity::Even };

    /// Parity of the derivative.
    pub fn derivative(self) -> ParityPair {
        ParityPair { waist: self.waist.flip(), tip: self.tip.flip() }
    }

    /// Parity of a product.
    pub fn times(self, other: ParityPair) -> ParityPair {
        let mul = |a: Parity, b: Parity| if a == b { Parity::Even } else { Parity::Odd };
        ParityPair { waist: mul(self.waist, other.waist), tip: mul(self.tip, other.tip) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mesh {
    Uniform,
    /// `r(x) = (pi/2) (x - strength/(2 pi) sin(2 pi x))`; node spacing near both
    /// endpoints shrinks by the factor `1 - strength`.
    Stretched {
        strength: f64,
    },
}

impl Mesh {
    fn strength(self) -> f64 {
        match self {
            Mesh::Uniform => 0.0,
            Mesh::Stretched { strength } => strength,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeOrder {
    Second,
    Fourth,
}

impl SchemeOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            SchemeOrder::Second => 2,
            SchemeOrder::Fourth => 4,
        }
    }

    pub fn from_u32(order: u32) -> Result<SchemeOrder> {
        match order {
            2 => Ok(SchemeOrder::Second),
            4 => Ok(SchemeOrder::Fourth),
            k => Err(config(alloc::format!("unsupported scheme order {k} (expected 2 or 4)"))),
        }
    }

    pub(crate) fn ghosts(self) -> usize {
        match self {
            SchemeOrder::Second => 1,
            SchemeOrder::Fourth => 2,
        }
    }

    /// Ratio of the stencil's second-difference spectral radius to `4/h^2`.
    pub fn stiffness_factor(self) -> f64 {
        match self {
            SchemeOrder::Second => 1.0,
            SchemeOrder::Fourth => 4.0 / 3.0,
        }
    }
}

/// Which evolved function a parity entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Warp {
    Chi,
    Psi,
    Phi,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    mesh: Mesh,
    order: SchemeOrder,
    dx: f64,
    nodes: Vec<f64>,
    from_tip: Vec<f64>,
    jac: Vec<f64>,
    jac2: Vec<f64>,
    quad_weights: Vec<f64>,
}

/// Uniform second-order grid, the common case.
pub fn make_uniform_grid(node_count: usize) -> Result<Grid> {
    Grid::new(node_count, Mesh::Uniform, SchemeOrder::Second)
}

impl Grid {
    pub fn new(node_count: usize, mesh: Mesh, order: SchemeOrder) -> Result<Grid> {
        if node_count < MIN_NODES {
            return Err(config(alloc::format!("node_count {node_count} is below the minimum of {MIN_NODES}")));
        }
        let beta = mesh.strength();
        if !(0.0..0.95).contains(&beta) {
            return Err(config(alloc::format!("mesh strength {beta} outside [0, 0.95)")));
        }
        let m = node_count - 1;
        let dx = 1.0 / m as f64;
        let two_pi = 2.0 * PI;
        let mut nodes = Vec::with_capacity(node_count);
        let mut from_tip = Vec::with_capacity(node_count);
        let mut jac = Vec::with_capacity(node_count);
        let mut jac2 = Vec::with_capacity(node_count);
        for j in 0..node_count {
            // index arithmetic keeps x and 1-x exact at both ends
            let x = j as f64 / m as f64;
            let y = (m - j) as f64 / m as f64;
            let r = FRAC_PI_2 * (x - beta / two_pi * sin(two_pi * x));
            let u = FRAC_PI_2 * (y - beta / two_pi * sin(two_pi * y));
            nodes.push(if j == m {
                FRAC_PI_2
            } else if j == 0 {
                0.0
            } else {
                r
            });
            from_tip.push(if j == m {
                0.0
            } else if j == 0 {
                FRAC_PI_2
            } else {
                u
            });
            jac.push(FRAC_PI_2 * (1.0 - beta * cos(two_pi * x)));
            jac2.push(FRAC_PI_2 * two_pi * beta * sin(two_pi * x));
        }
        jac2[0] = 0.0;
        jac2[m] = 0.0;

        let mut quad_weights: Vec<f64> = match order {
            SchemeOrder::Second => {
                let mut w = vec![1.0; node_count];
                w[0] = 0.5;
                w[m] = 0.5;
                w
            }
            SchemeOrder::Fourth => {
                // Gregory end corrections, exact for cubics
                let mut w = vec![1.0; node_count];
                let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
                for (k, &e) in ends.iter().enumerate() {
                    w[k] = e;
                    w[m - k] = e;
                }
                w
            }
        };
        for (w, &jj) in quad_weights.iter_mut().zip(&jac) {
            *w *= dx * jj;
        }

        Ok(Grid { mesh, order, dx, nodes, from_tip, jac, jac2, quad_weights })
    }

    pub fn with_order(&self, order: SchemeOrder) -> Grid {
        Grid::new(self.node_count(), self.mesh, order).expect("existing grid parameters are valid")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `pi/2 - r_i`, computed without cancellation near the tip.
    pub fn distance_to_tip(&self) -> &[f64] {
        &self.from_tip
    }

    pub fn mesh(&self) -> Mesh {
        self.mesh
    }

    pub fn order(&self) -> SchemeOrder {
        self.order
    }

    /// Spacing of the computational coordinate.
    pub fn computational_spacing(&self) -> f64 {
        self.dx
    }

    /// Local mesh width `dr/dx * dx` at node `i`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.jac[i] * self.dx
    }

    /// Mesh widths at every node.
    pub fn spacings(&self) -> Vec<f64> {
        self.jac.iter().map(|j| j * self.dx).collect()
    }

    pub fn parity_of(warp: Warp) -> ParityPair {
        match warp {
            Warp::Chi => ParityPair::CHI,
            Warp::Psi => ParityPair::PSI,
            Warp::Phi => ParityPair::PHI,
        }
    }

    pub fn parity_table(&self) -> [(Warp, ParityPair); 3] {
        [(Warp::Chi, ParityPair::CHI), (Warp::Psi, ParityPair::PSI), (Warp::Phi, ParityPair::PHI)]
    }

    /// First derivative in `r`; checks the declared parity against `f` first.
    pub fn d_dr(&self, f: &[f64], parity: ParityPair) -> Result<Vec<f64>> {
        self.check_parity(f, parity, 1e-8)?;
        let mut out = vec![0.0; f.len()];
        self.first(f, parity, &mut out);
        Ok(out)
    }

    /// Second derivative in `r`; checks the declared parity against `f` first.
    pub fn d2_dr2(&self, f: &[f64], parity: ParityPair) -> Result<Vec<f64>> {
        self.check_parity(f, parity, 1e-8)?;
        let mut d1 = vec![0.0; f.len()];
        let mut d2 = vec![0.0; f.len()];
        self.first_and_second(f, parity, &mut d1, &mut d2);
        Ok(d2)
    }

    /// A function declared odd at an endpoint must vanish there.
    pub fn check_parity(&self, f: &[f64], parity: ParityPair, rel_tol: f64) -> Result<()> {
        if f.len() != self.node_count() {
            return Err(data(alloc::format!(
                "sample count {} does not match node count {}",
                f.len(),
                self.node_count()
            )));
        }
        let scale = max_abs(f).max(f64::MIN_POSITIVE);
        let last = f.len() - 1;
        if parity.waist == Parity::Odd && abs(f[0]) > rel_tol * scale {
            return Err(data(alloc::format!("function declared odd at r=0 has value {:e}", f[0])));
        }
        if parity.tip == Parity::Odd && abs(f[last]) > rel_tol * scale {
            return Err(data(alloc::format!("function declared odd at r=pi/2 has value {:e}", f[last])));
        }
        Ok(())
    }

    fn extend(&self, f: &[f64], parity: ParityPair) -> Vec<f64> {
        let g = self.order.ghosts();
        let n = f.len();
        let mut ext = Vec::with_capacity(n + 2 * g);
        let s0 = parity.waist.sign();
        let s1 = parity.tip.sign();
        for k in (1..=g).rev() {
            ext.push(s0 * f[k]);
        }
        ext.extend_from_slice(f);
        for k in 1..=g {
            ext.push(s1 * f[n - 1 - k]);
        }
        ext
    }

    /// First derivative in `r` without parity validation.
    pub fn first(&self, f: &[f64], parity: ParityPair, out: &mut [f64]) {
        let g = self.order.ghosts();
        let e = self.extend(f, parity);
        let inv = 1.0 / self.dx;
        for i in 0..f.len() {
            let c = i + g;
            let fx = match self.order {
                SchemeOrder::Second => 0.5 * (e[c + 1] - e[c - 1]) * inv,
                SchemeOrder::Fourth => (8.0 * (e[c + 1] - e[c - 1]) - (e[c + 2] - e[c - 2])) * inv / 12.0,
            };
            out[i] = fx / self.jac[i];
        }
        fix_endpoint_derivative(out, parity);
    }

    /// First and second derivatives in `r` without parity validation.
    pub fn first_and_second(&self, f: &[f64], parity: ParityPair, d1: &mut [f64], d2: &mut [f64]) {
        let g = self.order.ghosts();
        let e = self.extend(f, parity);
        let inv = 1.0 / self.dx;
        let inv2 = inv * inv;
        for i in 0..f.len() {
            let c = i + g;
            let (fx, fxx) = match self.order {
                SchemeOrder::Second => (0.5 * (e[c + 1] - e[c - 1]) * inv, (e[c + 1] - 2.0 * e[c] + e[c - 1]) * inv2),
                SchemeOrder::Fourth => (
                    (8.0 * (e[c + 1] - e[c - 1]) - (e[c + 2] - e[c - 2])) * inv / 12.0,
                    (16.0 * (e[c + 1] + e[c - 1]) - (e[c + 2] + e[c - 2]) - 30.0 * e[c]) * inv2 / 12.0,
                ),
            };
            let j = self.jac[i];
            let fr = fx / j;
            d1[i] = fr;
            d2[i] = (fxx - self.jac2[i] * fr) / (j * j);
        }
        fix_endpoint_derivative(d1, parity);
        // second derivative of an odd function vanishes at that endpoint
        let last = f.len() - 1;
        if parity.waist == Parity::Odd {
            d2[0] = 0.0;
        }
        if parity.tip == Parity::Odd {
            d2[last] = 0.0;
        }
    }

    /// `int_0^{pi/2} f dr` with the grid's quadrature rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.node_count());
        f.iter().zip(&self.quad_weights).map(|(a, w)| a * w).sum()
    }

    /// `F(r_i) = int_0^{r_i} f dr` at every node, using the parity of `f` to
    /// close the stencil at both ends.
    pub fn cumulative_integral(&self, f: &[f64], parity: ParityPair) -> Vec<f64> {
        let n = f.len();
        // integrand in the computational coordinate
        let gx: Vec<f64> = f.iter().zip(&self.jac).map(|(a, j)| a * j).collect();
        let mut out = vec![0.0; n];
        match self.order {
            SchemeOrder::Second => {
                for i in 1..n {
                    out[i] = out[i - 1] + 0.5 * self.dx * (gx[i - 1] + gx[i]);
                }
            }
            SchemeOrder::Fourth => {
                let e = self.extend(&gx, parity);
                let g = self.order.ghosts();
                for i in 1..n {
                    let c = i - 1 + g;
                    let piece = (-e[c - 1] + 13.0 * e[c] + 13.0 * e[c + 1] - e[c + 2]) / 24.0;
                    out[i] = out[i - 1] + piece * self.dx;
                }
            }
        }
        out
    }

    /// Value at the waist of a function that is even there, extrapolated from
    /// the first interior nodes as a polynomial in `r^2`.
    pub fn extrapolate_even_to_waist(&self, f: &[f64]) -> f64 {
        let k = self.extrapolation_points();
        let u: Vec<f64> = (1..=k).map(|i| self.nodes[i]).collect();
        let vals: Vec<f64> = (1..=k).map(|i| f[i]).collect();
        lagrange_at_zero(&u, &vals)
    }

    /// Value at the tip of a function that is even there.
    pub fn extrapolate_even_to_tip(&self, f: &[f64]) -> f64 {
        let k = self.extrapolation_points();
        let last = f.len() - 1;
        let u: Vec<f64> = (1..=k).map(|i| self.from_tip[last - i]).collect();
        let vals: Vec<f64> = (1..=k).map(|i| f[last - i]).collect();
        lagrange_at_zero(&u, &vals)
    }

    fn extrapolation_points(&self) -> usize {
        match self.order {
            SchemeOrder::Second => 2,
            SchemeOrder::Fourth => 3,
        }
    }
}

fn fix_endpoint_derivative(d1: &mut [f64], parity: ParityPair) {
    let last = d1.len() - 1;
    if parity.waist == Parity::Even {
        d1[0] = 0.0;
    }
    if parity.tip == Parity::Even {
        d1[last] = 0.0;
    }
}

/// Interpolate `(u_k^2, v_k)` and evaluate at `u = 0`.
fn lagrange_at_zero(u: &[f64], v: &[f64]) -> f64 {
    let w: Vec<f64> = u.iter().map(|x| x * x).collect();
    let mut acc = 0.0;
    for i in 0..w.len() {
        let mut li = 1.0;
        for j in 0..w.len() {
            if i != j {
                li *= w[j] / (w[j] - w[i]);
            }
        }
        acc += li * v[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, sin};

    fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid.nodes().iter().map(|&r| f(r)).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    #[test]
    fn uniform_grid_partitions_the_interval() {
        let g = make_uniform_grid(17).unwrap();
        assert_eq!(g.node_count(), 17);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[16], FRAC_PI_2);
        assert!((g.spacing(3) - PI / 32.0).abs() < 1e-15);
        for (i, r) in g.nodes().iter().enumerate() {
            assert!((r - i as f64 * PI / 32.0).abs() < 1e-14);
        }

        let g = make_uniform_grid(401).unwrap();
        assert_eq!(g.node_count(), 401);
        assert!((g.spacing(200) - PI / 800.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_nodes_is_a_configuration_error() {
        assert!(matches!(make_uniform_grid(2), Err(crate::Error::Config(_))));
        assert!(matches!(make_uniform_grid(15), Err(crate::Error::Config(_))));
    }

    #[test]
    fn nodes_are_strictly_increasing_for_stretched_meshes() {
        let g = Grid::new(65, Mesh::Stretched { strength: 0.8 }, SchemeOrder::Fourth).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.spacing(0) < 0.25 * g.spacing(32));
        for (r, u) in g.nodes().iter().zip(g.distance_to_tip()) {
            assert!((r + u - FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_of_cos_and_sin() {
        for order in [SchemeOrder::Second, SchemeOrder::Fourth] {
            let g = Grid::new(201, Mesh::Uniform, order).unwrap();
            let h = g.spacing(0);
            let d = g.d_dr(&sample(&g, cos), ParityPair::PSI).unwrap();
            let tol = match order {
                SchemeOrder::Second => h * h,
                SchemeOrder::Fourth => h * h * h * h,
            };
            assert!(max_err(&d, &sample(&g, |r| -sin(r))) < tol);
            let d = g.d_dr(&sample(&g, sin), ParityPair::PHI).unwrap();
            assert!(max_err(&d, &sample(&g, cos)) < tol);
        }
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let g = make_uniform_grid(33).unwrap();
        let ones = vec![1.0; 33];
        let d = g.d_dr(&ones, ParityPair::EVEN).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
        let d2 = g.d2_dr2(&ones, ParityPair::EVEN).unwrap();
        assert!(d2.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stencils_are_exact_on_polynomials_of_scheme_degree() {
        // Away from the ends, and at the waist for an even polynomial.
        for (order, deg) in [(SchemeOrder::Second, 2), (SchemeOrder::Fourth, 4)] {
            let g = Grid::new(41, Mesh::Uniform, order).unwrap();
            let p = |r: f64| (0..=deg).map(|k| (k as f64 + 1.0) * r.powi(k)).sum::<f64>();
            let dp = |r: f64| (1..=deg).map(|k| (k as f64 + 1.0) * k as f64 * r.powi(k - 1)).sum::<f64>();
            let f = sample(&g, p);
            let mut d1 = vec![0.0; 41];
            let mut d2 = vec![0.0; 41];
            g.first_and_second(&f, ParityPair::EVEN, &mut d1, &mut d2);
            for i in 3..38 {
                assert!((d1[i] - dp(g.nodes()[i])).abs() < 1e-10, "{order:?} node {i}");
            }
            let even = |r: f64| 2.0 - 3.0 * r * r + if deg == 4 { 0.5 * r.powi(4) } else { 0.0 };
            let f = sample(&g, even);
            g.first_and_second(&f, ParityPair::EVEN, &mut d1, &mut d2);
            for i in 0..3 {
                let r = g.nodes()[i];
                let exact = -6.0 + if deg == 4 { 6.0 * r * r } else { 0.0 };
                assert!((d2[i] - exact).abs() < 1e-9, "{order:?} node {i}: {}", d2[i]);
            }
        }
    }

    #[test]
    fn refinement_reduces_errors_by_the_scheme_factor() {
        for (order, factor) in [(SchemeOrder::Second, 3.8), (SchemeOrder::Fourth, 14.0)] {
            let err = |n: usize| {
                let g = Grid::new(n, Mesh::Stretched { strength: 0.5 }, order).unwrap();
                let f = sample(&g, |r| cos(r) * (1.0 + 0.3 * sin(r) * sin(r)));
                let exact = sample(&g, |r| -sin(r) * (1.0 + 0.3 * sin(r) * sin(r)) + cos(r) * 0.6 * sin(r) * cos(r));
                let d = g.d_dr(&f, ParityPair::PSI).unwrap();
                let q = g.integrate(&f);
                // int cos (1 + 0.3 sin^2) = 1 + 0.1
                (max_err(&d, &exact), (q - 1.1).abs())
            };
            let (d1, q1) = err(51);
            let (d2, q2) = err(101);
            assert!(d1 / d2 > factor, "{order:?}: derivative ratio {}", d1 / d2);
            assert!(q1 / q2 > factor, "{order:?}: quadrature ratio {}", q1 / q2);
        }
    }

    #[test]
    fn quadrature_of_simple_integrands() {
        let g = make_uniform_grid(101).unwrap();
        assert!((g.integrate(&vec![1.0; 101]) - FRAC_PI_2).abs() < 1e-14);
        let h = g.spacing(0);
        assert!((g.integrate(&sample(&g, cos)) - 1.0).abs() < h * h);
    }

    #[test]
    fn cumulative_integral_ends_at_the_total() {
        for order in [SchemeOrder::Second, SchemeOrder::Fourth] {
            let g = Grid::new(81, Mesh::Stretched { strength: 0.3 }, order).unwrap();
            let f = sample(&g, |r| 1.0 + 0.2 * cos(2.0 * r));
            let c = g.cumulative_integral(&f, ParityPair::EVEN);
            let exact = sample(&g, |r| r + 0.1 * sin(2.0 * r));
            let tol = if order == SchemeOrder::Second { 1e-4 } else { 1e-7 };
            assert!(max_err(&c, &exact) < tol, "{order:?}: {}", max_err(&c, &exact));
        }
    }

    #[test]
    fn inconsistent_parity_is_a_data_error() {
        let g = make_uniform_grid(33).unwrap();
        let f = sample(&g, cos);
        assert!(matches!(g.d_dr(&f, ParityPair::PHI), Err(crate::Error::Data(_))));
        assert!(matches!(g.d_dr(&f[..10], ParityPair::PSI), Err(crate::Error::Data(_))));
    }

    #[test]
    fn even_extrapolation_recovers_endpoint_values() {
        let g = Grid::new(101, Mesh::Uniform, SchemeOrder::Fourth).unwrap();
        let f = sample(&g, |r| cos(2.0 * r) + 3.0);
        assert!((g.extrapolate_even_to_waist(&f) - 4.0).abs() < 1e-8);
        assert!((g.extrapolate_even_to_tip(&f) - 2.0).abs() < 1e-8);
    }
}
