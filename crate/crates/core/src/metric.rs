//! Metric profiles and their pointwise curvature.
//!
//! Every s-derivative is `chi^{-1} d/dr` of a grid derivative. The four
//! sectional curvatures are 0/0 forms at one or both singular orbits; those
//! entries are filled with their smooth limits:
//!
//! | quantity | waist `r = 0`                  | tip `r = pi/2`               |
//! |----------|--------------------------------|------------------------------|
//! | `K_top`  | `-psi_ss/psi` (regular)        | even extrapolation           |
//! | `K_1`    | even extrapolation             | `-phi_ss/phi` (regular)      |
//! | `K_2`    | equals `K_top`                 | equals `K_1`                 |
//! | `L`      | equals `K_1`                   | `N/phi^2` (regular)          |
//!
//! `L` is evaluated as `N/phi^2` with `N = 1 - phi_s^2` obtained by integrating
//! `dN/dr = 2 phi phi_r K_1` from the waist, which avoids the cancellation in
//! `1 - phi_s^2` where `phi_s` is close to one.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, data, Error, Result};
use crate::grid::{Grid, ParityPair};
use crate::math::{abs, max_abs, max_of};

/// Discretized warping functions `(chi, psi, phi)` of an invariant metric on `S^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    grid: Arc<Grid>,
    n: usize,
    chi: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

impl Profile {
    /// Checks shapes, finiteness and `n >= 3`; smoothness is checked separately by
    /// [`validate_smoothness`].
    pub fn new(grid: Arc<Grid>, n: usize, chi: Vec<f64>, psi: Vec<f64>, phi: Vec<f64>) -> Result<Profile> {
        if n < 3 {
            return Err(config(alloc::format!("dimension n = {n} must be at least 3")));
        }
        let m = grid.node_count();
        for (name, f) in [("chi", &chi), ("psi", &psi), ("phi", &phi)] {
            if f.len() != m {
                return Err(data(alloc::format!("{name} has {} samples, grid has {m} nodes", f.len())));
            }
            if let Some(i) = f.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numeric { node: i, what: alloc::format!("{name} is not finite") });
            }
        }
        Ok(Profile { grid, n, chi, psi, phi })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn into_parts(self) -> (Arc<Grid>, usize, Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.grid, self.n, self.chi, self.psi, self.phi)
    }

    /// The metric `c^2 g`.
    pub fn scaled(&self, c: f64) -> Profile {
        let s = |f: &[f64]| f.iter().map(|x| c * x).collect::<Vec<_>>();
        Profile { grid: self.grid.clone(), n: self.n, chi: s(&self.chi), psi: s(&self.psi), phi: s(&self.phi) }
    }

    /// Largest of the two orbit radii, used to make tolerances relative.
    pub fn length_scale(&self) -> f64 {
        max_of(&self.psi).max(max_of(&self.phi))
    }

    /// Arc length from the waist at every node, and the total length.
    pub fn arc_length(&self) -> (Vec<f64>, f64) {
        arc_length(self)
    }
}

/// `s(r_i) = int_0^{r_i} chi dr` and `ell = s(pi/2)`.
pub fn arc_length(p: &Profile) -> (Vec<f64>, f64) {
    let s = p.grid.cumulative_integral(&p.chi, ParityPair::CHI);
    let ell = *s.last().unwrap_or(&0.0);
    (s, ell)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothnessCondition {
    ChiPositive,
    PsiPositive,
    PhiPositive,
    PsiVanishesAtTip,
    PhiVanishesAtWaist,
    /// `phi'(0) = chi(0)`.
    WaistCompatibility,
    /// `psi'(pi/2) = -chi(pi/2)`.
    TipCompatibility,
}

impl SmoothnessCondition {
    pub fn describe(self) -> &'static str {
        match self {
            SmoothnessCondition::ChiPositive => "chi > 0 on [0, pi/2]",
            SmoothnessCondition::PsiPositive => "psi > 0 on [0, pi/2)",
            SmoothnessCondition::PhiPositive => "phi > 0 on (0, pi/2]",
            SmoothnessCondition::PsiVanishesAtTip => "psi(pi/2) = 0 (psi odd at the tip)",
            SmoothnessCondition::PhiVanishesAtWaist => "phi(0) = 0 (phi odd at the waist)",
            SmoothnessCondition::WaistCompatibility => "phi'(0) = chi(0)",
            SmoothnessCondition::TipCompatibility => "psi'(pi/2) = -chi(pi/2)",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessCheck {
    pub condition: SmoothnessCondition,
    /// Relative violation; 0 when the condition holds exactly.
    pub violation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub tol: f64,
    pub checks: Vec<SmoothnessCheck>,
}

impl SmoothnessReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SmoothnessCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn worst_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.violation).fold(0.0, f64::max)
    }
}

/// Default relative tolerance for [`validate_smoothness`].
pub const SMOOTHNESS_TOL: f64 = 1e-6;

/// Checks positivity, the vanishing of odd warps and the two compatibility
/// conditions at the singular orbits.
///
/// The derivatives in the compatibility conditions are measured by fitting
/// `phi/r` (and `psi/(pi/2 - r)`) with a quartic in `r^2` through the five
/// nodes nearest the orbit. That fit is independent of the difference scheme
/// and accurate well below the default tolerance for resolved profiles.
pub fn validate_smoothness(p: &Profile, tol: f64) -> SmoothnessReport {
    let last = p.chi.len() - 1;
    let grid = p.grid();
    let scale_psi = max_abs(&p.psi).max(f64::MIN_POSITIVE);
    let scale_phi = max_abs(&p.phi).max(f64::MIN_POSITIVE);
    let scale_chi = max_abs(&p.chi).max(f64::MIN_POSITIVE);

    let positivity =
        |f: &[f64], scale: f64| f.iter().fold(0.0, |v: f64, &x| if x > 0.0 { v } else { v.max(1.0 + abs(x) / scale) });
    let mut out = Vec::with_capacity(7);
    let mut push = |condition, violation: f64| {
        let violation = if violation.is_nan() { f64::INFINITY } else { violation };
        out.push(SmoothnessCheck { condition, violation, passed: violation <= tol });
    };
    push(SmoothnessCondition::ChiPositive, positivity(&p.chi, scale_chi));
    push(SmoothnessCondition::PsiPositive, positivity(&p.psi[..last], scale_psi));
    push(SmoothnessCondition::PhiPositive, positivity(&p.phi[1..], scale_phi));
    push(SmoothnessCondition::PsiVanishesAtTip, abs(p.psi[last]) / scale_psi);
    push(SmoothnessCondition::PhiVanishesAtWaist, abs(p.phi[0]) / scale_phi);

    let k = 5.min(last - 1);
    let r = grid.nodes();
    let u = grid.distance_to_tip();
    let waist_u: Vec<f64> = (1..=k).map(|i| r[i]).collect();
    let waist_v: Vec<f64> = (1..=k).map(|i| p.phi[i] / r[i]).collect();
    let slope0 = extrapolate_in_square(&waist_u, &waist_v);
    push(SmoothnessCondition::WaistCompatibility, abs(slope0 - p.chi[0]) / abs(p.chi[0]));
    let tip_u: Vec<f64> = (1..=k).map(|i| u[last - i]).collect();
    let tip_v: Vec<f64> = (1..=k).map(|i| p.psi[last - i] / u[last - i]).collect();
    let slope1 = extrapolate_in_square(&tip_u, &tip_v);
    push(SmoothnessCondition::TipCompatibility, abs(slope1 - p.chi[last]) / abs(p.chi[last]));

    SmoothnessReport { tol, checks: out }
}

fn extrapolate_in_square(u: &[f64], v: &[f64]) -> f64 {
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

/// The four sectional-curvature eigenvalues and their s-derivatives.
///
/// `*_s` arrays are direct differences of the curvature arrays. The `_id`
/// arrays evaluate the same derivatives through the first-order identities
/// `(K_2)_s = (phi_s/phi)(K_top - K_2) - (psi_s/psi)(K_2 - K_1)` and
/// `L_s = 2 (phi_s/phi)(K_1 - L)`, which carry less noise.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    pub k_top: Vec<f64>,
    pub k1_perp: Vec<f64>,
    pub k2_perp: Vec<f64>,
    pub l_sec: Vec<f64>,
    pub k_top_s: Vec<f64>,
    pub k1_perp_s: Vec<f64>,
    pub k2_perp_s: Vec<f64>,
    pub l_sec_s: Vec<f64>,
    pub k2_perp_s_id: Vec<f64>,
    pub l_sec_s_id: Vec<f64>,
}

/// Ricci eigenvalues (multiplicities 1, 1, n-2) and scalar curvature.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciField {
    pub rc11: Vec<f64>,
    pub rc22: Vec<f64>,
    pub rc_ii: Vec<f64>,
    pub scalar: Vec<f64>,
}

/// Everything the flow and the curvature kernels need from one profile.
#[derive(Clone, Debug)]
pub(crate) struct Kinematics {
    pub chi_r: Vec<f64>,
    #[allow(dead_code)]
    pub psi_s: Vec<f64>,
    pub phi_s: Vec<f64>,
    /// `psi_s/psi`; `0` at the waist, `NaN` at the tip.
    pub a: Vec<f64>,
    /// `phi_s/phi`; `NaN` at the waist, `0` at the tip.
    pub b: Vec<f64>,
    pub k_top: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub l: Vec<f64>,
}

impl Kinematics {
    pub fn new(grid: &Grid, chi: &[f64], psi: &[f64], phi: &[f64]) -> Kinematics {
        let m = chi.len();
        let last = m - 1;
        let mut chi_r = vec![0.0; m];
        grid.first(chi, ParityPair::CHI, &mut chi_r);
        let mut psi_r = vec![0.0; m];
        let mut psi_rr = vec![0.0; m];
        grid.first_and_second(psi, ParityPair::PSI, &mut psi_r, &mut psi_rr);
        let mut phi_r = vec![0.0; m];
        let mut phi_rr = vec![0.0; m];
        grid.first_and_second(phi, ParityPair::PHI, &mut phi_r, &mut phi_rr);

        let mut psi_s = vec![0.0; m];
        let mut phi_s = vec![0.0; m];
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut k_top = vec![0.0; m];
        let mut k1 = vec![0.0; m];
        let mut k2 = vec![0.0; m];
        for i in 0..m {
            let x = chi[i];
            let ps = psi_r[i] / x;
            let fs = phi_r[i] / x;
            let pss = (psi_rr[i] - chi_r[i] * ps) / (x * x);
            let fss = (phi_rr[i] - chi_r[i] * fs) / (x * x);
            psi_s[i] = ps;
            phi_s[i] = fs;
            if i < last {
                a[i] = ps / psi[i];
                k_top[i] = -pss / psi[i];
            }
            if i > 0 {
                b[i] = fs / phi[i];
                k1[i] = -fss / phi[i];
            }
            if i > 0 && i < last {
                k2[i] = -(ps * fs) / (psi[i] * phi[i]);
            }
        }
        a[last] = f64::NAN;
        b[0] = f64::NAN;
        k_top[last] = grid.extrapolate_even_to_tip(&k_top);
        k1[0] = grid.extrapolate_even_to_waist(&k1);
        k2[0] = k_top[0];
        k2[last] = k1[last];

        // N = 1 - phi_s^2 integrated from the waist
        let integrand: Vec<f64> = (0..m).map(|i| 2.0 * phi[i] * phi_r[i] * k1[i]).collect();
        let nn = grid.cumulative_integral(&integrand, ParityPair::ODD);
        let mut l = vec![0.0; m];
        for i in 1..m {
            l[i] = nn[i] / (phi[i] * phi[i]);
        }
        l[0] = k1[0];

        Kinematics { chi_r, psi_s, phi_s, a, b, k_top, k1, k2, l }
    }

    pub fn from_profile(p: &Profile) -> Kinematics {
        Kinematics::new(&p.grid, &p.chi, &p.psi, &p.phi)
    }

    /// `chi^{-1} d/dr` of an even/even array; zero at both ends.
    pub fn d_ds_even(&self, grid: &Grid, chi: &[f64], f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        grid.first(f, ParityPair::EVEN, &mut out);
        for (o, x) in out.iter_mut().zip(chi) {
            *o /= x;
        }
        out
    }

    pub fn first_nonfinite(&self) -> Option<(usize, &'static str)> {
        for (name, f) in [("K_top", &self.k_top), ("K_1", &self.k1), ("K_2", &self.k2), ("L", &self.l)] {
            if let Some(i) = f.iter().position(|x| !x.is_finite()) {
                return Some((i, name));
            }
        }
        None
    }
}

/// Sectional curvatures with finite values at both singular orbits.
pub fn sectional_curvatures(p: &Profile) -> Result<CurvatureField> {
    let kin = Kinematics::from_profile(p);
    curvature_field_from(p, &kin)
}

pub(crate) fn curvature_field_from(p: &Profile, kin: &Kinematics) -> Result<CurvatureField> {
    if let Some((node, name)) = kin.first_nonfinite() {
        return Err(Error::Numeric { node, what: alloc::format!("{name} is not finite") });
    }
    let g = p.grid();
    let k_top_s = kin.d_ds_even(g, &p.chi, &kin.k_top);
    let k1_perp_s = kin.d_ds_even(g, &p.chi, &kin.k1);
    let k2_perp_s = kin.d_ds_even(g, &p.chi, &kin.k2);
    let l_sec_s = kin.d_ds_even(g, &p.chi, &kin.l);
    let (k2_perp_s_id, l_sec_s_id) = identity_derivatives(kin);
    Ok(CurvatureField {
        k_top: kin.k_top.clone(),
        k1_perp: kin.k1.clone(),
        k2_perp: kin.k2.clone(),
        l_sec: kin.l.clone(),
        k_top_s,
        k1_perp_s,
        k2_perp_s,
        l_sec_s,
        k2_perp_s_id,
        l_sec_s_id,
    })
}

fn identity_derivatives(kin: &Kinematics) -> (Vec<f64>, Vec<f64>) {
    let m = kin.k_top.len();
    let mut k2s = vec![0.0; m];
    let mut ls = vec![0.0; m];
    for i in 1..m - 1 {
        k2s[i] = kin.b[i] * (kin.k_top[i] - kin.k2[i]) - kin.a[i] * (kin.k2[i] - kin.k1[i]);
        ls[i] = 2.0 * kin.b[i] * (kin.k1[i] - kin.l[i]);
    }
    (k2s, ls)
}

/// Ricci eigenvalues and scalar curvature.
pub fn ricci_and_scalar(p: &Profile) -> Result<RicciField> {
    let kin = Kinematics::from_profile(p);
    if let Some((node, name)) = kin.first_nonfinite() {
        return Err(Error::Numeric { node, what: alloc::format!("{name} is not finite") });
    }
    Ok(ricci_from(p.n, &kin))
}

pub(crate) fn ricci_from(n: usize, kin: &Kinematics) -> RicciField {
    let nm2 = (n - 2) as f64;
    let nm3 = (n - 3) as f64;
    let m = kin.k_top.len();
    let mut rc11 = Vec::with_capacity(m);
    let mut rc22 = Vec::with_capacity(m);
    let mut rc_ii = Vec::with_capacity(m);
    let mut scalar = Vec::with_capacity(m);
    for i in 0..m {
        let (kt, k1, k2, l) = (kin.k_top[i], kin.k1[i], kin.k2[i], kin.l[i]);
        let a = kt + nm2 * k1;
        let b = kt + nm2 * k2;
        let c = k1 + k2 + nm3 * l;
        rc11.push(a);
        rc22.push(b);
        rc_ii.push(c);
        scalar.push(a + b + nm2 * c);
    }
    RicciField { rc11, rc22, rc_ii, scalar }
}

/// `Sc = 2 K_top + 2(n-2)(K_1 + K_2) + (n-2)(n-3) L`.
pub fn scalar_from_sectional(n: usize, c: &CurvatureField) -> Vec<f64> {
    let nm2 = (n - 2) as f64;
    let nm3 = (n - 3) as f64;
    (0..c.k_top.len())
        .map(|i| 2.0 * c.k_top[i] + 2.0 * nm2 * (c.k1_perp[i] + c.k2_perp[i]) + nm2 * nm3 * c.l_sec[i])
        .collect()
}

/// `Delta f = f_ss + (psi_s/psi + (n-2) phi_s/phi) f_s`.
///
/// At an orbit where `f` is even the drift term is replaced by its limit
/// (`(n-1) f_ss` at the waist, `2 f_ss` at the tip). Where `f` is odd the
/// Laplacian of the extended function is singular and the entry is `NaN`.
pub fn scalar_laplacian(p: &Profile, f: &[f64], parity: ParityPair) -> Result<Vec<f64>> {
    p.grid.check_parity(f, parity, 1e-8)?;
    let kin = Kinematics::from_profile(p);
    Ok(laplacian_with(p, &kin, f, parity))
}

pub(crate) fn laplacian_with(p: &Profile, kin: &Kinematics, f: &[f64], parity: ParityPair) -> Vec<f64> {
    use crate::grid::Parity;
    let m = f.len();
    let last = m - 1;
    let nm2 = (p.n - 2) as f64;
    let mut fr = vec![0.0; m];
    let mut frr = vec![0.0; m];
    p.grid.first_and_second(f, parity, &mut fr, &mut frr);
    let mut out = vec![0.0; m];
    for i in 0..m {
        let x = p.chi[i];
        let fs = fr[i] / x;
        let fss = (frr[i] - kin.chi_r[i] * fs) / (x * x);
        out[i] = if i == 0 {
            match parity.waist {
                Parity::Even => (nm2 + 1.0) * fss,
                Parity::Odd => f64::NAN,
            }
        } else if i == last {
            match parity.tip {
                Parity::Even => 2.0 * fss,
                Parity::Odd => f64::NAN,
            }
        } else {
            fss + (kin.a[i] + nm2 * kin.b[i]) * fs
        };
    }
    out
}

/// Max-norm residuals of the two first-order curvature identities over interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResiduals {
    /// `(K_2)_s - [(phi_s/phi)(K_top - K_2) - (psi_s/psi)(K_2 - K_1)]`
    pub k2_perp: f64,
    /// `L_s - 2 (phi_s/phi)(K_1 - L)`
    pub l_sec: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.k2_perp.max(self.l_sec)
    }
}

/// Compares the differenced s-derivatives of `c` with the identity forms.
pub fn curvature_derivative_identities(c: &CurvatureField, _p: &Profile) -> IdentityResiduals {
    let m = c.k_top.len();
    let mut r2: f64 = 0.0;
    let mut rl: f64 = 0.0;
    for i in 1..m - 1 {
        r2 = r2.max(abs(c.k2_perp_s[i] - c.k2_perp_s_id[i]));
        rl = rl.max(abs(c.l_sec_s[i] - c.l_sec_s_id[i]));
    }
    IdentityResiduals { k2_perp: r2, l_sec: rl }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_uniform_grid, Mesh, SchemeOrder};
    use crate::math::{cos, sin, FRAC_PI_2};

    fn round(rho: f64, n: usize, nodes: usize, order: SchemeOrder) -> Profile {
        let g = Arc::new(Grid::new(nodes, Mesh::Uniform, order).unwrap());
        let r = g.nodes().to_vec();
        let chi = vec![rho; nodes];
        let psi: Vec<f64> = r.iter().map(|&x| rho * cos(x)).collect();
        let mut phi: Vec<f64> = r.iter().map(|&x| rho * sin(x)).collect();
        phi[0] = 0.0;
        let mut psi = psi;
        psi[nodes - 1] = 0.0;
        Profile::new(g, n, chi, psi, phi).unwrap()
    }

    #[test]
    fn round_sphere_has_constant_curvature() {
        for order in [SchemeOrder::Second, SchemeOrder::Fourth] {
            for rho in [1.0, 2.0] {
                let p = round(rho, 3, 201, order);
                let c = sectional_curvatures(&p).unwrap();
                let k = 1.0 / (rho * rho);
                let tol = if order == SchemeOrder::Second { 1e-4 } else { 1e-8 };
                for f in [&c.k_top, &c.k1_perp, &c.k2_perp, &c.l_sec] {
                    for (i, v) in f.iter().enumerate() {
                        assert!((v - k).abs() < tol * k, "{order:?} rho={rho} node {i}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn round_sphere_ricci_and_scalar() {
        let p = round(1.0, 3, 201, SchemeOrder::Fourth);
        let rc = ricci_and_scalar(&p).unwrap();
        for i in 0..201 {
            assert!((rc.rc11[i] - 2.0).abs() < 1e-7);
            assert!((rc.rc22[i] - 2.0).abs() < 1e-7);
            assert!((rc.rc_ii[i] - 2.0).abs() < 1e-7);
            assert!((rc.scalar[i] - 6.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constants_are_harmonic() {
        let p = round(1.0, 4, 65, SchemeOrder::Second);
        let lap = scalar_laplacian(&p, &[3.0; 65], ParityPair::EVEN).unwrap();
        assert!(lap.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_of_degree_two_harmonic() {
        // cos 2r restricted from |z1|^2 - |z2|^2 on S^3: eigenvalue -8
        for order in [SchemeOrder::Second, SchemeOrder::Fourth] {
            let p = round(1.0, 3, 201, order);
            let f: Vec<f64> = p.grid().nodes().iter().map(|&r| cos(2.0 * r)).collect();
            let lap = scalar_laplacian(&p, &f, ParityPair::EVEN).unwrap();
            for (i, &r) in p.grid().nodes().iter().enumerate() {
                assert!((lap[i] + 8.0 * cos(2.0 * r)).abs() < 1e-3, "{order:?} node {i}");
            }
        }
    }

    #[test]
    fn laplacian_of_cos_r_on_round_three_sphere() {
        // Independent symbolic value: (sin^2 r - 2 cos^2 r)/cos r, singular at the tip.
        let p = round(1.0, 3, 401, SchemeOrder::Second);
        let f: Vec<f64> = p.grid().nodes().iter().map(|&r| cos(r)).collect();
        let mut f = f;
        f[400] = 0.0;
        let lap = scalar_laplacian(&p, &f, ParityPair::PSI).unwrap();
        assert!(lap[400].is_nan());
        for (i, &r) in p.grid().nodes().iter().enumerate().take(350) {
            let exact = (sin(r) * sin(r) - 2.0 * cos(r) * cos(r)) / cos(r);
            assert!((lap[i] - exact).abs() < 1e-4, "node {i}: {} vs {exact}", lap[i]);
        }
        assert!((lap[0] + 2.0).abs() < 1e-4);
    }

    #[test]
    fn arc_length_of_constant_chi() {
        let p = round(1.0, 3, 101, SchemeOrder::Fourth);
        let (s, ell) = p.arc_length();
        assert!((ell - FRAC_PI_2).abs() < 1e-14);
        for (a, b) in s.iter().zip(p.grid().nodes()) {
            assert!((a - b).abs() < 1e-14);
        }
        let p2 = p.scaled(2.0);
        let (_, ell2) = p2.arc_length();
        assert!((ell2 - core::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn smoothness_of_round_sphere_and_a_broken_profile() {
        let p = round(1.0, 3, 101, SchemeOrder::Second);
        let rep = validate_smoothness(&p, SMOOTHNESS_TOL);
        assert!(rep.passed(), "{rep:?}");

        let (g, n, chi, psi, phi) = p.clone().into_parts();
        let phi2: Vec<f64> = phi.iter().map(|x| 2.0 * x).collect();
        let bad = Profile::new(g.clone(), n, chi.clone(), psi.clone(), phi2).unwrap();
        let rep = validate_smoothness(&bad, SMOOTHNESS_TOL);
        assert!(!rep.passed());
        let failed: Vec<_> = rep.failures().map(|c| c.condition).collect();
        assert_eq!(failed, [SmoothnessCondition::WaistCompatibility]);

        let mut psi3 = psi.clone();
        psi3[100] = 0.1;
        let bad = Profile::new(g, n, chi, psi3, phi).unwrap();
        let rep = validate_smoothness(&bad, SMOOTHNESS_TOL);
        assert!(rep.failures().any(|c| c.condition == SmoothnessCondition::PsiVanishesAtTip));
    }

    #[test]
    fn identities_vanish_on_the_round_sphere() {
        let p = round(1.5, 4, 401, SchemeOrder::Fourth);
        let c = sectional_curvatures(&p).unwrap();
        let r = curvature_derivative_identities(&c, &p);
        // both sides vanish in the continuum; what remains is fourth-order truncation
        assert!(r.max() < 5e-8, "{r:?}");
    }

    #[test]
    fn profile_rejects_bad_shapes() {
        let g = Arc::new(make_uniform_grid(17).unwrap());
        assert!(matches!(Profile::new(g.clone(), 3, vec![1.0; 16], vec![1.0; 17], vec![1.0; 17]), Err(Error::Data(_))));
        assert!(matches!(
            Profile::new(g.clone(), 2, vec![1.0; 17], vec![1.0; 17], vec![1.0; 17]),
            Err(Error::Config(_))
        ));
        let mut chi = vec![1.0; 17];
        chi[4] = f64::NAN;
        assert!(matches!(Profile::new(g, 3, chi, vec![1.0; 17], vec![1.0; 17]), Err(Error::Numeric { node: 4, .. })));
    }
}
