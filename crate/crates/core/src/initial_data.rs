//! Closed-form metrics: sausage slices, round spheres and exact ancient solutions.
//!
//! A sausage slice with parameter `tau < 0` has, with `a = -2 tau` and
//! `T = tanh a`,
//!
//! ```text
//! chi = sqrt(T / (1 - T^2 sin^2 r)),  psi = chi cos r,  phi = artanh(T sin r) / sqrt(T)
//! ```
//!
//! For large `a` the whole tip cap lives in an `r`-interval of width about
//! `sech(2a)`, so [`Chart::ArcLength`] re-parametrizes by arc length. With
//! `eps = exp(-4a)` and `v >= 0` measured from the tip,
//!
//! ```text
//! psi   = tanh v sqrt((1 - eps) / (1 + eps sinh^2 v))
//! phi   = (a - log cosh v + log(1 + eps sinh^2 v) / 2) / sqrt(T)
//! ell-s = sqrt(1 - eps) int_0^v dw / sqrt(1 + eps sinh^2 w)
//! ```
//!
//! which is well conditioned for every `a` the library accepts.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{config, Result};
use crate::grid::Grid;
use crate::math::{
    cos, cosh, exp, ln, ln1p, ln_cosh, one_minus_tanh, sech2, sin, sinh, sqrt, tanh, FRAC_PI_2, FRAC_PI_4, PI,
};
use crate::metric::Profile;
use crate::quad;

/// Largest `|tau|` for which the generators stay within `f64` range.
pub const MAX_ABS_TAU: f64 = 150.0;

/// How grid nodes are placed on the sausage slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chart {
    /// Nodes at the angle `r` of the closed form.
    Angle,
    /// Nodes equally spaced in arc length; the grid coordinate is `(pi/2) s/ell`.
    ArcLength,
}

impl Chart {
    /// The chart that resolves the tip of the slice at `tau`.
    pub fn for_tau(tau: f64) -> Chart {
        if tau > -1.0 {
            Chart::Angle
        } else {
            Chart::ArcLength
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chart::Angle => "angle",
            Chart::ArcLength => "arc_length",
        }
    }

    pub fn parse(s: &str) -> Option<Chart> {
        match s {
            "angle" => Some(Chart::Angle),
            "arc_length" => Some(Chart::ArcLength),
            _ => None,
        }
    }
}

fn check_tau(tau: f64, what: &str) -> Result<()> {
    if !(tau < 0.0) || !tau.is_finite() {
        return Err(config(alloc::format!("{what} must be negative, got {tau}")));
    }
    if -tau > MAX_ABS_TAU {
        return Err(config(alloc::format!("{what} = {tau} is beyond the supported range -{MAX_ABS_TAU}")));
    }
    Ok(())
}

/// `sin r` and `cos r` at every node, each taken from the better-conditioned end.
fn trig_at_nodes(grid: &Grid) -> (Vec<f64>, Vec<f64>) {
    let r = grid.nodes();
    let u = grid.distance_to_tip();
    let mut sr = Vec::with_capacity(r.len());
    let mut cr = Vec::with_capacity(r.len());
    for (&ri, &ui) in r.iter().zip(u) {
        if ri < FRAC_PI_4 {
            sr.push(sin(ri));
            cr.push(cos(ri));
        } else {
            sr.push(cos(ui));
            cr.push(sin(ui));
        }
    }
    (sr, cr)
}

/// Sausage slice sampled in the angle chart.
pub fn sausage_slice(tau: f64, n: usize, grid: &Arc<Grid>) -> Result<Profile> {
    sausage_slice_in(tau, n, grid, Chart::Angle)
}

pub fn sausage_slice_in(tau: f64, n: usize, grid: &Arc<Grid>, chart: Chart) -> Result<Profile> {
    check_tau(tau, "tau")?;
    if n < 3 {
        return Err(config(alloc::format!("dimension n = {n} must be at least 3")));
    }
    let (chi, psi, phi) = match chart {
        Chart::Angle => sausage_angle(tau, grid),
        Chart::ArcLength => sausage_arc(tau, grid),
    };
    Profile::new(grid.clone(), n, chi, psi, phi)
}

fn sausage_angle(tau: f64, grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a = -2.0 * tau;
    let t = tanh(a);
    let sq = sqrt(t);
    let sech2a = sech2(a);
    let omt = one_minus_tanh(a);
    let (sr, cr) = trig_at_nodes(grid);
    let m = sr.len();
    let mut chi = Vec::with_capacity(m);
    let mut psi = Vec::with_capacity(m);
    let mut phi = Vec::with_capacity(m);
    for i in 0..m {
        let (s, c) = (sr[i], cr[i]);
        let x = sqrt(t / (c * c + s * s * sech2a));
        chi.push(x);
        psi.push(x * c);
        // 1 - T sin r split into two non-negative parts
        let one_minus = c * c / (1.0 + s) + s * omt;
        phi.push(0.5 * (ln1p(t * s) - ln(one_minus)) / sq);
    }
    psi[m - 1] = 0.0;
    phi[0] = 0.0;
    (chi, psi, phi)
}

struct ArcParam {
    a: f64,
    eps: f64,
    sqrt_one_minus_eps: f64,
}

impl ArcParam {
    fn new(tau: f64) -> ArcParam {
        let a = -2.0 * tau;
        let eps = exp(-4.0 * a);
        ArcParam { a, eps, sqrt_one_minus_eps: sqrt(1.0 - eps) }
    }

    fn v_max(&self) -> f64 {
        // asinh(e^a) = a + log(1 + sqrt(1 + e^{-2a}))
        self.a + ln1p(sqrt(1.0 + exp(-2.0 * self.a)))
    }

    fn density(&self, v: f64) -> f64 {
        let sh = sinh(v);
        self.sqrt_one_minus_eps / sqrt(1.0 + self.eps * sh * sh)
    }

    /// Arc length from the tip to the point with parameter `v`.
    fn distance(&self, v: f64) -> f64 {
        if self.eps * sinh(v) * sinh(v) < 1e-18 {
            return self.sqrt_one_minus_eps * v;
        }
        quad::integrate(|w| self.density(w), 0.0, v, 1e-15 * (1.0 + v))
    }

    fn invert(&self, u: f64, v_max: f64) -> f64 {
        let mut v = (u / self.sqrt_one_minus_eps).min(v_max);
        for _ in 0..50 {
            let dv = (self.distance(v) - u) / self.density(v);
            v -= dv;
            v = v.clamp(0.0, v_max);
            if dv.abs() <= 1e-15 * (1.0 + v) {
                break;
            }
        }
        v
    }

    fn psi(&self, v: f64) -> f64 {
        let sh = sinh(v);
        tanh(v) * sqrt((1.0 - self.eps) / (1.0 + self.eps * sh * sh))
    }

    fn phi(&self, v: f64, sqrt_t: f64) -> f64 {
        let sh = sinh(v);
        (self.a - ln_cosh(v) + 0.5 * ln1p(self.eps * sh * sh)) / sqrt_t
    }
}

/// Total length `ell` of the waist-to-tip geodesic of the sausage slice at `tau`.
pub fn sausage_length(tau: f64) -> Result<f64> {
    check_tau(tau, "tau")?;
    let p = ArcParam::new(tau);
    Ok(p.distance(p.v_max()))
}

fn sausage_arc(tau: f64, grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = ArcParam::new(tau);
    let v_max = p.v_max();
    let ell = p.distance(v_max);
    let sqrt_t = sqrt(tanh(p.a));
    let scale = ell / FRAC_PI_2;
    let xi = grid.nodes();
    let u = grid.distance_to_tip();
    let m = u.len();
    let chi = alloc::vec![scale; m];
    let mut psi = alloc::vec![0.0; m];
    let mut phi = alloc::vec![0.0; m];
    let waist = WaistParam::new(p.a);

    // Waist half: march x(s) outward from the waist so phi keeps full relative accuracy.
    let mut x = 0.0;
    let mut s_prev = 0.0;
    let mut i = 1;
    while i < m - 1 && scale * xi[i] <= 0.5 * ell {
        let target = scale * xi[i];
        let mut xn = x + (target - s_prev) / waist.psi(x);
        for _ in 0..50 {
            let f = s_prev + quad::integrate(|y| waist.psi(y), x, xn, 1e-16 * (1.0 + target)) - target;
            let dx = f / waist.psi(xn);
            xn -= dx;
            if dx.abs() <= 1e-16 * (1.0 + xn) {
                break;
            }
        }
        psi[i] = waist.psi(xn);
        phi[i] = waist.phi(xn, sqrt_t);
        s_prev = target;
        x = xn;
        i += 1;
    }
    // Tip half: parametrize by the distance from the tip.
    for j in i..m - 1 {
        let v = p.invert(scale * u[j], v_max);
        psi[j] = p.psi(v);
        phi[j] = p.phi(v, sqrt_t);
    }
    psi[0] = sqrt_t;
    phi[m - 1] = p.a / sqrt_t;
    (chi, psi, phi)
}

/// Mercator coordinate `x` with `sin r = tanh x`, used on the waist half.
struct WaistParam {
    t: f64,
    t2: f64,
    omt: f64,
    cosh2a: f64,
}

impl WaistParam {
    fn new(a: f64) -> WaistParam {
        WaistParam { t: tanh(a), t2: tanh(2.0 * a), omt: one_minus_tanh(a), cosh2a: cosh(2.0 * a) }
    }

    /// `psi^2 = sinh 2a / (cosh 2a + cosh 2x)`; also `ds/dx`.
    fn psi(&self, x: f64) -> f64 {
        sqrt(self.t2 / (1.0 + cosh(2.0 * x) / self.cosh2a))
    }

    /// `artanh(T tanh x)/sqrt(T)` written as `log1p(2y/(1-y))/2` with `1-y` split exactly.
    fn phi(&self, x: f64, sqrt_t: f64) -> f64 {
        let y = self.t * tanh(x);
        let one_minus_y = self.omt + self.t * one_minus_tanh(x);
        0.5 * ln1p(2.0 * y / one_minus_y) / sqrt_t
    }
}

/// Round sphere of radius `rho`: `(chi, psi, phi) = (rho, rho cos r, rho sin r)`.
pub fn round_sphere(rho: f64, grid: &Arc<Grid>, n: usize) -> Result<Profile> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(config(alloc::format!("radius must be positive, got {rho}")));
    }
    let (sr, cr) = trig_at_nodes(grid);
    let m = sr.len();
    let chi = alloc::vec![rho; m];
    let mut psi: Vec<f64> = cr.iter().map(|c| rho * c).collect();
    let mut phi: Vec<f64> = sr.iter().map(|s| rho * s).collect();
    psi[m - 1] = 0.0;
    phi[0] = 0.0;
    Profile::new(grid.clone(), n, chi, psi, phi)
}

/// Exact ancient `O(2) x O(2)`-invariant solution on `S^3` at time `t < 0`.
///
/// With `C = cosh(-2t)`, `S = sinh(-2t)`, `D1 = cos^2 r + C sin^2 r` and
/// `D2 = sin^2 r + C cos^2 r`:
///
/// ```text
/// chi^2 = 2 C S / (D1 D2),   psi^2 = 2 S cos^2 r / D2,   phi^2 = 2 S sin^2 r / D1
/// ```
pub fn hypersausage_exact(t: f64, grid: &Arc<Grid>) -> Result<Profile> {
    check_tau(t, "t")?;
    let (chi, psi, phi) = hypersausage_samples(t, grid, 2.0);
    Profile::new(grid.clone(), 3, chi, psi, phi)
}

/// Samples of the hypersausage formulas with an arbitrary overall factor on the
/// squared warps; the exact flow has `factor = 2`.
pub fn hypersausage_samples(t: f64, grid: &Grid, factor: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let c = cosh(-2.0 * t);
    let s = sinh(-2.0 * t);
    let (sr, cr) = trig_at_nodes(grid);
    let m = sr.len();
    let mut chi = Vec::with_capacity(m);
    let mut psi = Vec::with_capacity(m);
    let mut phi = Vec::with_capacity(m);
    for i in 0..m {
        let (s2, c2) = (sr[i] * sr[i], cr[i] * cr[i]);
        let d1 = c2 + s2 * c;
        let d2 = s2 + c2 * c;
        chi.push(sqrt(factor * c * s / (d1 * d2)));
        psi.push(cr[i] * sqrt(factor * s / d2));
        phi.push(sr[i] * sqrt(factor * s / d1));
    }
    psi[m - 1] = 0.0;
    phi[0] = 0.0;
    (chi, psi, phi)
}

/// A rotationally symmetric metric `chi^2 dr^2 + psi^2 dtheta^2` on `S^2`,
/// sampled on the half `r in [0, pi/2]` and reflected through the equator.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionProfile {
    pub grid: Arc<Grid>,
    pub chi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl SectionProfile {
    pub fn area(&self) -> f64 {
        let f: Vec<f64> = self.chi.iter().zip(&self.psi).map(|(x, y)| x * y).collect();
        4.0 * PI * self.grid.integrate(&f)
    }

    /// Gauss curvature `-psi_ss/psi`, with the pole value extrapolated.
    pub fn gauss_curvature(&self) -> Vec<f64> {
        let phi = alloc::vec![1.0; self.chi.len()];
        let kin = crate::metric::Kinematics::new(&self.grid, &self.chi, &self.psi, &phi);
        kin.k_top
    }
}

/// Time slice of the ancient sausage on `S^2`.
pub fn sausage_exact(t: f64, grid: &Arc<Grid>) -> Result<SectionProfile> {
    check_tau(t, "t")?;
    let (chi, psi, _) = sausage_angle(t, grid);
    Ok(SectionProfile { grid: grid.clone(), chi, psi })
}

/// The steady cigar of scale `lambda` in arc-length form.
#[derive(Clone, Debug, PartialEq)]
pub struct CigarProfile {
    pub lambda: f64,
    pub s: Vec<f64>,
    pub warp: Vec<f64>,
}

impl CigarProfile {
    /// `2 lambda^{-2} sech^2(s/lambda)`.
    pub fn gauss_curvature(&self) -> Vec<f64> {
        let l2 = self.lambda * self.lambda;
        self.s.iter().map(|&s| 2.0 * sech2(s / self.lambda) / l2).collect()
    }

    pub fn scalar_curvature(&self) -> Vec<f64> {
        self.gauss_curvature().iter().map(|k| 2.0 * k).collect()
    }

    pub fn tip_scalar_curvature(&self) -> f64 {
        4.0 / (self.lambda * self.lambda)
    }

    pub fn asymptotic_circumference(&self) -> f64 {
        2.0 * PI * self.lambda
    }
}

pub fn cigar_profile(lambda: f64, s_samples: &[f64]) -> Result<CigarProfile> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(config(alloc::format!("cigar scale must be positive, got {lambda}")));
    }
    let warp = s_samples.iter().map(|&s| cigar_warp(lambda, s)).collect();
    Ok(CigarProfile { lambda, s: s_samples.to_vec(), warp })
}

/// `lambda tanh(s/lambda)`.
pub fn cigar_warp(lambda: f64, s: f64) -> f64 {
    lambda * tanh(s / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Mesh, SchemeOrder};
    use crate::metric::{sectional_curvatures, validate_smoothness, SMOOTHNESS_TOL};

    fn grid(n: usize, order: SchemeOrder) -> Arc<Grid> {
        Arc::new(Grid::new(n, Mesh::Uniform, order).unwrap())
    }

    // Reference values from 40-digit evaluation of the closed forms.
    const SQRT_TANH_2: f64 = 0.981_849_061_758_382_9;
    const PHI_TIP_TAU_M1: f64 = 2.036_972_970_589_004_3;
    const KTOP_WAIST_TAU_M1: f64 = 0.073_287_140_651_731_21;
    const L_TIP_TAU_M1: f64 = 0.241_006_895_018_954_2;
    const ELL_TAU_M1: f64 = 2.692_879_349_820_291_3;
    const ELL_TAU_M20: f64 = 40.693_147_180_559_945;
    const KTOP_QUARTER_TAU_M1: f64 = 0.200_516_937_953_568_53;

    #[test]
    fn sausage_slice_endpoint_values() {
        let g = grid(201, SchemeOrder::Fourth);
        let p = sausage_slice(-1.0, 3, &g).unwrap();
        assert!((p.chi()[0] - SQRT_TANH_2).abs() < 1e-15);
        assert!((p.psi()[0] - SQRT_TANH_2).abs() < 1e-15);
        assert!((p.phi()[200] - PHI_TIP_TAU_M1).abs() < 1e-14);
        assert!(validate_smoothness(&p, SMOOTHNESS_TOL).passed());
        let (_, ell) = p.arc_length();
        assert!((ell - ELL_TAU_M1).abs() < 1e-7, "{ell}");
    }

    #[test]
    fn sausage_slice_curvatures_match_closed_forms() {
        let g = grid(401, SchemeOrder::Fourth);
        let p = sausage_slice(-1.0, 4, &g).unwrap();
        let c = sectional_curvatures(&p).unwrap();
        assert!((c.k_top[0] - KTOP_WAIST_TAU_M1).abs() < 1e-8, "{}", c.k_top[0]);
        assert!((c.l_sec[400] - L_TIP_TAU_M1).abs() < 1e-8, "{}", c.l_sec[400]);
        assert!((c.k_top[200] - KTOP_QUARTER_TAU_M1).abs() < 1e-8);
        for i in 0..401 {
            assert!(
                (c.k1_perp[i] - c.k2_perp[i]).abs() < 1e-6 * (1.0 + c.k1_perp[i].abs()),
                "node {i}: {} {}",
                c.k1_perp[i],
                c.k2_perp[i]
            );
        }
    }

    #[test]
    fn arc_length_chart_reproduces_the_angle_chart_geometry() {
        let g = grid(401, SchemeOrder::Fourth);
        let pa = sausage_slice_in(-1.0, 3, &g, Chart::Angle).unwrap();
        let pb = sausage_slice_in(-1.0, 3, &g, Chart::ArcLength).unwrap();
        assert!((pb.chi()[0] * FRAC_PI_2 - ELL_TAU_M1).abs() < 1e-12);
        assert_eq!(pb.psi()[0], pa.psi()[0]);
        assert!((pb.phi()[400] - pa.phi()[400]).abs() < 1e-13);
        let ka = sectional_curvatures(&pa).unwrap();
        let kb = sectional_curvatures(&pb).unwrap();
        assert!((ka.k_top[0] - kb.k_top[0]).abs() < 1e-7);
        assert!((ka.k_top[400] - kb.k_top[400]).abs() < 1e-6);
        assert!(validate_smoothness(&pb, SMOOTHNESS_TOL).passed());
    }

    #[test]
    fn sausage_length_far_back() {
        assert!((sausage_length(-1.0).unwrap() - ELL_TAU_M1).abs() < 1e-13);
        assert!((sausage_length(-20.0).unwrap() - ELL_TAU_M20).abs() < 1e-12);
    }

    #[test]
    fn deep_slice_has_a_unit_cigar_tip() {
        let g = Arc::new(Grid::new(401, Mesh::Stretched { strength: 0.6 }, SchemeOrder::Fourth).unwrap());
        let p = sausage_slice_in(-20.0, 3, &g, Chart::ArcLength).unwrap();
        let c = sectional_curvatures(&p).unwrap();
        // K_top -> (1 + T^2)/T = 2, K_1 = K_2 -> 1/a
        assert!((c.k_top[400] - 2.0).abs() < 1e-4, "{}", c.k_top[400]);
        assert!((c.k1_perp[400] - 0.025).abs() < 1e-6);
        assert!((c.l_sec[400] - 0.000_625).abs() < 1e-7);
        assert!(validate_smoothness(&p, SMOOTHNESS_TOL).passed());
    }

    #[test]
    fn generators_reject_bad_parameters() {
        let g = grid(33, SchemeOrder::Second);
        assert!(sausage_slice(0.0, 3, &g).is_err());
        assert!(sausage_slice(1.0, 3, &g).is_err());
        assert!(round_sphere(0.0, &g, 3).is_err());
        assert!(hypersausage_exact(0.5, &g).is_err());
        assert!(sausage_exact(0.0, &g).is_err());
        assert!(cigar_profile(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn round_sphere_curvature_scales() {
        let g = grid(101, SchemeOrder::Fourth);
        for (rho, k) in [(1.0, 1.0), (2.0, 0.25)] {
            let p = round_sphere(rho, &g, 3).unwrap();
            let c = sectional_curvatures(&p).unwrap();
            assert!(c.k_top.iter().chain(&c.l_sec).all(|x| (x - k).abs() < 1e-7));
        }
    }

    #[test]
    fn hypersausage_values_at_minus_one() {
        let g = grid(101, SchemeOrder::Second);
        let p = hypersausage_exact(-1.0, &g).unwrap();
        // sqrt(2 tanh 2) and sqrt(2 sinh 2)
        assert!((p.psi()[0] - 1.388_544_259_342_003_7).abs() < 1e-14);
        assert!((p.chi()[0] - 2.693_273_253_068_473_5).abs() < 1e-14);
        assert!(validate_smoothness(&p, SMOOTHNESS_TOL).passed());
    }

    #[test]
    fn sausage_area_decays_linearly() {
        let g = grid(401, SchemeOrder::Fourth);
        let a1 = sausage_exact(-1.0, &g).unwrap().area();
        let a2 = sausage_exact(-0.25, &g).unwrap().area();
        assert!((a1 - 8.0 * PI).abs() < 1e-6, "{a1}");
        assert!(((a1 - a2) - 8.0 * PI * 0.75).abs() < 1e-6);
        assert!((sausage_exact(-1.0, &g).unwrap().chi[0] - SQRT_TANH_2).abs() < 1e-15);
    }

    #[test]
    fn sausage_becomes_round_near_its_singular_time() {
        let g = grid(201, SchemeOrder::Fourth);
        let ratio = |t: f64| {
            let k = sausage_exact(t, &g).unwrap().gauss_curvature();
            let max = k.iter().copied().fold(f64::MIN, f64::max);
            let min = k.iter().copied().fold(f64::MAX, f64::min);
            max / min
        };
        let (r1, r2, r3) = (ratio(-1.0), ratio(-0.1), ratio(-0.01));
        assert!(r1 > r2 && r2 > r3);
        assert!(r3 < 1.001, "{r3}");
    }

    #[test]
    fn cigar_values() {
        let c = cigar_profile(1.0, &[0.0, 1.0, 50.0]).unwrap();
        assert!((c.warp[1] - 0.761_594_155_955_764_9).abs() < 1e-15);
        assert_eq!(c.scalar_curvature()[0], 4.0);
        assert_eq!(c.tip_scalar_curvature(), 4.0);
        assert!((c.warp[2] - 1.0).abs() < 1e-15);
        let c2 = cigar_profile(2.0, &[0.0]).unwrap();
        assert!((c2.asymptotic_circumference() - 4.0 * PI).abs() < 1e-15);
    }
}
