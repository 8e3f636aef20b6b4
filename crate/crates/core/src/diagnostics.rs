//! Per-snapshot geometric summaries and comparisons with model geometries.
//!
//! Ordering and gradient margins are normalized by a *resolved local scale*
//! at each node: the largest curvature magnitude there, floored by the
//! smallest curvature that a second difference at the local arc-length
//! spacing can resolve to [`MONITOR_TOL`] against rounding. Without the floor,
//! a nearly flat region (where curvatures are far below `1e-13`) would report
//! rounding noise as a relative violation of order one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::grid::Grid;
use crate::math::{abs, max_of, sqrt, tanh, FRAC_PI_3, FRAC_PI_6, PI};
use crate::metric::{curvature_field_from, ricci_from, CurvatureField, Kinematics, Profile};

/// Relative tolerance the ordering monitors are designed to resolve.
pub const MONITOR_TOL: f64 = 1e-6;

/// Rounding amplification assumed for a second difference (units of machine epsilon).
const NOISE_FACTOR: f64 = 64.0;

/// Default arc-length window for the cylinder and cigar comparisons.
pub const DEFAULT_GAP_WINDOW: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GirthCandidate {
    /// The circle orbit at `r = 0`, length `2 pi psi(0)`.
    WaistCircle,
    /// A great circle of the `S^{n-2}` orbit at `r = pi/2`, length `2 pi phi(pi/2)`.
    TipCircle,
    /// The closed meridian through both poles of the section, length `4 ell`.
    Meridian,
}

impl GirthCandidate {
    pub fn tag(self) -> &'static str {
        match self {
            GirthCandidate::WaistCircle => "waist_circle",
            GirthCandidate::TipCircle => "tip_circle",
            GirthCandidate::Meridian => "meridian",
        }
    }

    pub fn parse(s: &str) -> Option<GirthCandidate> {
        match s {
            "waist_circle" => Some(GirthCandidate::WaistCircle),
            "tip_circle" => Some(GirthCandidate::TipCircle),
            "meridian" => Some(GirthCandidate::Meridian),
            _ => None,
        }
    }
}

/// One monitor record.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoSummary {
    pub step: u64,
    /// Simulation time, starting at 0 for the initial profile.
    pub time: f64,
    pub ell: f64,
    pub h: f64,
    pub area: f64,
    pub d: f64,
    pub girth_est: f64,
    pub girth_candidate: GirthCandidate,
    pub sc_max: f64,
    pub lambda_hat: f64,
    /// Normalized minima of `K_top - K_2`, `K_2 - K_1`, `K_1 - L` and `L`.
    pub ordering_margins: [f64; 4],
    /// Normalized minima of `(K_top)_s`, `(K_1)_s`, `(K_2)_s` and `L_s`.
    pub gradient_margins: [f64; 4],
    pub cylinder_gap: f64,
    pub cigar_gap: f64,
    /// `sup |psi - h|`, `sup |phi_s - 1|`, `sup |K|` over the waist window.
    pub cylinder_parts: [f64; 3],
    /// `sup |psi - model| / h` and `sup |L|` over the tip window.
    pub cigar_parts: [f64; 2],
    /// `K_top` at the waist.
    pub k_top_waist: f64,
    pub psi_max: f64,
    pub phi_max: f64,
}

impl GeoSummary {
    pub fn min_ordering_margin(&self) -> f64 {
        self.ordering_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_gradient_margin(&self) -> f64 {
        self.gradient_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Arc-length spacing at every node.
pub fn arc_spacing(p: &Profile) -> Vec<f64> {
    let g = p.grid();
    p.chi().iter().enumerate().map(|(i, x)| x * g.spacing(i)).collect()
}

/// Largest curvature magnitude at each node, floored at the rounding resolution.
pub fn resolved_curvature_scale(c: &CurvatureField, ds: &[f64]) -> Vec<f64> {
    (0..c.k_top.len())
        .map(|i| {
            let k = abs(c.k_top[i]).max(abs(c.k1_perp[i])).max(abs(c.k2_perp[i])).max(abs(c.l_sec[i]));
            k + NOISE_FACTOR * f64::EPSILON / (ds[i] * ds[i] * MONITOR_TOL)
        })
        .collect()
}

/// The gradient analogue: `kappa^{3/2}`, floored at the resolution of a third difference.
pub fn resolved_gradient_scale(c: &CurvatureField, ds: &[f64]) -> Vec<f64> {
    (0..c.k_top.len())
        .map(|i| {
            let k = abs(c.k_top[i]).max(abs(c.k1_perp[i])).max(abs(c.k2_perp[i])).max(abs(c.l_sec[i]));
            k * sqrt(k) + NOISE_FACTOR * f64::EPSILON / (ds[i] * ds[i] * ds[i] * MONITOR_TOL)
        })
        .collect()
}

/// Normalized ordering margins with the node where each minimum occurs.
pub fn ordering_margins(c: &CurvatureField, ds: &[f64]) -> [(f64, usize); 4] {
    let scale = resolved_curvature_scale(c, ds);
    let diffs: [&dyn Fn(usize) -> f64; 4] =
        [&|i| c.k_top[i] - c.k2_perp[i], &|i| c.k2_perp[i] - c.k1_perp[i], &|i| c.k1_perp[i] - c.l_sec[i], &|i| {
            c.l_sec[i]
        }];
    diffs.map(|f| min_normalized(scale.len(), |i| f(i) / scale[i]))
}

/// Normalized gradient margins. `K_2` and `L` use their identity forms.
pub fn gradient_margins(c: &CurvatureField, ds: &[f64]) -> [(f64, usize); 4] {
    let scale = resolved_gradient_scale(c, ds);
    let arrays = [&c.k_top_s, &c.k1_perp_s, &c.k2_perp_s_id, &c.l_sec_s_id];
    arrays.map(|a| min_normalized(scale.len(), |i| a[i] / scale[i]))
}

fn min_normalized(m: usize, f: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for i in 0..m {
        let v = f(i);
        if v < best.0 || v.is_nan() {
            best = (v, i);
            if v.is_nan() {
                break;
            }
        }
    }
    best
}

/// Quintic weight: `1/r^2` below `pi/6`, `1` above `pi/3`, C^2 in between.
pub fn weight(r: f64) -> f64 {
    let a = FRAC_PI_6;
    let b = FRAC_PI_3;
    if r <= a {
        return 1.0 / (r * r);
    }
    if r >= b {
        return 1.0;
    }
    let len = b - a;
    let t = (r - a) / len;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t2);
    let h00 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h10 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h20 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h01 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let (y0, d0, dd0) = (1.0 / (a * a), -2.0 / (a * a * a), 6.0 / (a * a * a * a));
    y0 * h00 + len * d0 * h10 + len * len * dd0 * h20 + h01
}

/// `X = w(r)(K_top - K_2)`, `Y = w(pi/2 - r)(K_2 - K_1)`, `Z = w(r)(K_1 - L)`.
///
/// Each difference vanishes at its singular endpoint, but its discrete value
/// carries an `O(h^p)` offset there which `w` would amplify like `1/r^2`. The
/// offset `D_0` (even extrapolation from interior nodes) is removed through
/// `w D - (w - 1) D_0`, which leaves the far side, where `w = 1`, untouched.
/// Endpoint entries are then filled by even extrapolation.
pub fn weighted_differences(p: &Profile) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let kin = Kinematics::from_profile(p);
    let c = curvature_field_from(p, &kin)?;
    Ok(weighted_from(p.grid(), &c))
}

pub(crate) fn weighted_from(g: &Grid, c: &CurvatureField) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = g.nodes();
    let u = g.distance_to_tip();
    let m = r.len();
    let dx: Vec<f64> = (0..m).map(|i| c.k_top[i] - c.k2_perp[i]).collect();
    let dy: Vec<f64> = (0..m).map(|i| c.k2_perp[i] - c.k1_perp[i]).collect();
    let dz: Vec<f64> = (0..m).map(|i| c.k1_perp[i] - c.l_sec[i]).collect();
    let (x0, z0) = (g.extrapolate_even_to_waist(&dx), g.extrapolate_even_to_waist(&dz));
    let y0 = g.extrapolate_even_to_tip(&dy);
    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    for i in 0..m {
        if i > 0 {
            let w = weight(r[i]);
            x[i] = w * dx[i] - (w - 1.0) * x0;
            z[i] = w * dz[i] - (w - 1.0) * z0;
        }
        if i < m - 1 {
            let w = weight(u[i]);
            y[i] = w * dy[i] - (w - 1.0) * y0;
        }
    }
    x[0] = g.extrapolate_even_to_waist(&x);
    z[0] = g.extrapolate_even_to_waist(&z);
    y[m - 1] = g.extrapolate_even_to_tip(&y);
    (x, y, z)
}

/// Shortest of the symmetric closed-geodesic candidates, with its tag.
pub fn girth_estimate(p: &Profile) -> (f64, GirthCandidate) {
    let (_, ell) = p.arc_length();
    girth_from(p, ell)
}

fn girth_from(p: &Profile, ell: f64) -> (f64, GirthCandidate) {
    let last = p.chi().len() - 1;
    let candidates = [
        (2.0 * PI * p.psi()[0], GirthCandidate::WaistCircle),
        (2.0 * PI * p.phi()[last], GirthCandidate::TipCircle),
        (4.0 * ell, GirthCandidate::Meridian),
    ];
    candidates.into_iter().fold(candidates[0], |best, c| if c.0 < best.0 { c } else { best })
}

/// `2 / sqrt(Sc(tip))`: the scale of the cigar whose tip scalar curvature matches.
pub fn lambda_estimate(p: &Profile) -> Result<f64> {
    let kin = Kinematics::from_profile(p);
    let rc = ricci_from(p.dimension(), &kin);
    lambda_from_tip_scalar(*rc.scalar.last().unwrap_or(&f64::NAN))
}

pub fn lambda_from_tip_scalar(sc_tip: f64) -> Result<f64> {
    if !(sc_tip > 0.0) {
        return Err(Error::Numeric {
            node: usize::MAX,
            what: alloc::format!("tip scalar curvature {sc_tip} is not positive"),
        });
    }
    Ok(2.0 / sqrt(sc_tip))
}

/// Cylinder and cigar comparison distances with their components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaps {
    pub cylinder: f64,
    pub cigar: f64,
    pub cylinder_parts: [f64; 3],
    pub cigar_parts: [f64; 2],
}

/// Compares the waist window `[0, window]` with the flat cylinder of waist
/// `2 pi h`, and the tip window `[ell - window, ell]` with the cigar of scale
/// `lambda_hat` times a flat factor.
pub fn asymptotic_gaps(p: &Profile, window: f64) -> Result<Gaps> {
    let (s, ell) = p.arc_length();
    if !(window > 0.0) || window >= 0.5 * ell {
        return Err(config(alloc::format!("gap window {window} must lie in (0, ell/2) with ell = {ell}")));
    }
    let kin = Kinematics::from_profile(p);
    let c = curvature_field_from(p, &kin)?;
    let rc = ricci_from(p.dimension(), &kin);
    let lambda = lambda_from_tip_scalar(*rc.scalar.last().unwrap())?;
    Ok(gaps_from(p, &kin, &c, &s, ell, lambda, window))
}

fn gaps_from(p: &Profile, kin: &Kinematics, c: &CurvatureField, s: &[f64], ell: f64, lambda: f64, window: f64) -> Gaps {
    let h = p.psi()[0];
    let mut cyl = [0.0f64; 3];
    let mut cig = [0.0f64; 2];
    for i in 0..s.len() {
        if s[i] <= window {
            let k = abs(c.k_top[i]).max(abs(c.k1_perp[i])).max(abs(c.k2_perp[i])).max(abs(c.l_sec[i]));
            cyl[0] = cyl[0].max(abs(p.psi()[i] - h));
            cyl[1] = cyl[1].max(abs(kin.phi_s[i] - 1.0));
            cyl[2] = cyl[2].max(k);
        }
        let u = ell - s[i];
        if u <= window {
            let model = lambda * tanh(u.max(0.0) / lambda);
            cig[0] = cig[0].max(abs(p.psi()[i] - model) / h);
            cig[1] = cig[1].max(abs(c.l_sec[i]));
        }
    }
    Gaps { cylinder: cyl.iter().sum(), cigar: cig.iter().sum(), cylinder_parts: cyl, cigar_parts: cig }
}

/// All monitor quantities for one profile. Gaps are `NaN` once `ell < 2 window`.
pub fn geometric_summary(p: &Profile, time: f64) -> Result<GeoSummary> {
    summary_with(p, time, 0, DEFAULT_GAP_WINDOW)
}

pub fn summary_with(p: &Profile, time: f64, step: u64, window: f64) -> Result<GeoSummary> {
    let kin = Kinematics::from_profile(p);
    summary_from(p, &kin, time, step, window)
}

pub(crate) fn summary_from(p: &Profile, kin: &Kinematics, time: f64, step: u64, window: f64) -> Result<GeoSummary> {
    let c = curvature_field_from(p, kin)?;
    let rc = ricci_from(p.dimension(), kin);
    let (s, ell) = p.arc_length();
    let last = s.len() - 1;
    let g = p.grid();
    let area_integrand: Vec<f64> = p.psi().iter().zip(p.chi()).map(|(a, b)| a * b).collect();
    let area = 4.0 * PI * g.integrate(&area_integrand);
    let (girth_est, girth_candidate) = girth_from(p, ell);
    let sc_max = max_of(&rc.scalar);
    let lambda_hat = lambda_from_tip_scalar(rc.scalar[last]).unwrap_or(f64::NAN);
    let ds = arc_spacing(p);
    let om = ordering_margins(&c, &ds);
    let gm = gradient_margins(&c, &ds);
    let gaps = if window > 0.0 && window < 0.5 * ell && lambda_hat.is_finite() {
        gaps_from(p, kin, &c, &s, ell, lambda_hat, window)
    } else {
        Gaps { cylinder: f64::NAN, cigar: f64::NAN, cylinder_parts: [f64::NAN; 3], cigar_parts: [f64::NAN; 2] }
    };
    Ok(GeoSummary {
        step,
        time,
        ell,
        h: p.psi()[0],
        area,
        d: p.phi()[last],
        girth_est,
        girth_candidate,
        sc_max,
        lambda_hat,
        ordering_margins: om.map(|x| x.0),
        gradient_margins: gm.map(|x| x.0),
        cylinder_gap: gaps.cylinder,
        cigar_gap: gaps.cigar,
        cylinder_parts: gaps.cylinder_parts,
        cigar_parts: gaps.cigar_parts,
        k_top_waist: c.k_top[0],
        psi_max: max_of(p.psi()),
        phi_max: max_of(p.phi()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Mesh, SchemeOrder};
    use crate::initial_data::{round_sphere, sausage_slice, sausage_slice_in, Chart};
    use alloc::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(n, Mesh::Uniform, SchemeOrder::Fourth).unwrap())
    }

    #[test]
    fn weight_is_c2_and_monotone() {
        let a = FRAC_PI_6;
        let b = FRAC_PI_3;
        let h = 1e-6;
        for &x in &[a, b] {
            let d1l = (weight(x) - weight(x - h)) / h;
            let d1r = (weight(x + h) - weight(x)) / h;
            assert!((d1l - d1r).abs() < 1e-3 * (1.0 + d1l.abs()), "slope jump at {x}");
        }
        let mut prev = weight(a);
        for k in 1..=1000 {
            let w = weight(a + (b - a) * k as f64 / 1000.0);
            assert!(w <= prev + 1e-15);
            prev = w;
        }
        assert!((weight(a) - 36.0 / (PI * PI)).abs() < 1e-14);
        assert_eq!(weight(b), 1.0);
    }

    #[test]
    fn round_sphere_summary() {
        let p = round_sphere(1.0, &grid(201), 3).unwrap();
        let sm = summary_with(&p, 0.0, 0, 0.5).unwrap();
        assert!((sm.ell - PI / 2.0).abs() < 1e-13);
        assert!((sm.h - 1.0).abs() < 1e-15);
        assert!((sm.area - 4.0 * PI).abs() < 1e-8);
        assert!((sm.d - 1.0).abs() < 1e-15);
        assert!((sm.girth_est - 2.0 * PI).abs() < 1e-12);
        assert!((sm.sc_max - 6.0).abs() < 1e-6);
        let (x, y, z) = weighted_differences(&p).unwrap();
        assert!(x.iter().chain(&y).chain(&z).all(|v| v.abs() < 1e-5), "{:?}", &x[..4]);
    }

    #[test]
    fn sausage_summary_values() {
        let p = sausage_slice(-1.0, 3, &grid(401)).unwrap();
        let sm = geometric_summary(&p, 0.0).unwrap();
        assert!((sm.area - 8.0 * PI).abs() < 1e-7, "{}", sm.area);
        assert!((sm.h - 0.981_849_061_758_382_9).abs() < 1e-15);
        assert!(sm.ordering_margins.iter().all(|&m| m >= -MONITOR_TOL), "{:?}", sm.ordering_margins);
        assert!(sm.gradient_margins.iter().all(|&m| m >= -MONITOR_TOL), "{:?}", sm.gradient_margins);
        let (x, y, z) = weighted_differences(&p).unwrap();
        // K_1 = K_2 identically on this family; what remains is truncation error
        assert!(y.iter().all(|v| v.abs() < 5e-5), "{:?}", &y[390..]);
        assert!(x.iter().all(|&v| v >= -1e-8));
        assert!(z.iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn girth_of_a_long_sausage_is_the_waist() {
        let p = sausage_slice_in(-5.0, 3, &grid(401), Chart::ArcLength).unwrap();
        let (g, tag) = girth_estimate(&p);
        assert_eq!(tag, GirthCandidate::WaistCircle);
        // 2 pi sqrt(tanh 10)
        assert!((g - 2.0 * PI * 0.999_999_997_938_846_4).abs() < 1e-12, "{g}");
    }

    #[test]
    fn lambda_from_scalar_curvature() {
        assert_eq!(lambda_from_tip_scalar(4.0).unwrap(), 1.0);
        assert_eq!(lambda_from_tip_scalar(16.0).unwrap(), 0.5);
        assert!(lambda_from_tip_scalar(0.0).is_err());
        assert!(lambda_from_tip_scalar(-1.0).is_err());
    }

    #[test]
    fn lambda_scales_with_the_metric() {
        let p = sausage_slice(-1.0, 4, &grid(201)).unwrap();
        let l1 = lambda_estimate(&p).unwrap();
        let l3 = lambda_estimate(&p.scaled(3.0)).unwrap();
        assert!((l3 / 3.0 - l1).abs() < 1e-12 * l1);
    }

    #[test]
    fn gap_window_is_checked() {
        let p = round_sphere(1.0, &grid(101), 3).unwrap();
        assert!(matches!(asymptotic_gaps(&p, 1.0), Err(Error::Config(_))));
        assert!(asymptotic_gaps(&p, 0.5).is_ok());
    }
}
