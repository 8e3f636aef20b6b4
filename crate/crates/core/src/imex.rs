//! ARS(2,2,2) implicit-explicit stepping.
//!
//! The implicit part is the diffusion-drift operator of each warping function
//! with coefficients frozen at the start of the step,
//!
//! ```text
//! L psi = psi_ss + (n-2)(phi_s/phi) psi_s      ((n-1) psi_ss at the waist)
//! M phi = phi_ss + (psi_s/psi) phi_s           (2 phi_ss at the tip)
//! ```
//!
//! discretized with the same parity-aware stencils as the explicit scheme.
//! Everything else (reaction terms, the `chi` equation, the gauge drift) is
//! explicit. The method is stiffly accurate, so the last stage is the update.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evolve::{gauge_field_from, rates_from, FlowState, Gauge, Rates};
use crate::grid::{Grid, ParityPair};
use crate::math::{abs, sqrt};
use crate::metric::{ricci_from, Kinematics, Profile};

const GAMMA: f64 = 1.0 - core::f64::consts::FRAC_1_SQRT_2;

/// Square matrix with `w` sub- and super-diagonals, stored row-wise.
#[derive(Clone, Debug)]
pub(crate) struct Band {
    w: usize,
    m: usize,
    data: Vec<f64>,
}

impl Band {
    pub fn zeros(m: usize, w: usize) -> Band {
        Band { w, m, data: vec![0.0; m * (2 * w + 1)] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.w {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Solves `A x = b` by Gaussian elimination without pivoting (in place).
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let (m, w) = (self.m, self.w);
        for k in 0..m {
            let piv = self.get(k, k);
            if !(abs(piv) > 0.0) || !piv.is_finite() {
                return Err(Error::Numeric { node: k, what: format!("zero pivot {piv} in implicit solve") });
            }
            for i in k + 1..(k + w + 1).min(m) {
                let f = self.get(i, k) / piv;
                if f == 0.0 {
                    continue;
                }
                for j in k..(k + w + 1).min(m) {
                    let v = self.get(i, j) - f * self.get(k, j);
                    self.set(i, j, v);
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..m).rev() {
            let mut s = b[k];
            for j in k + 1..(k + w + 1).min(m) {
                s -= self.get(k, j) * b[j];
            }
            b[k] = s / self.get(k, k);
        }
        Ok(())
    }
}

/// Frozen linear operator `D f = alpha f_ss + beta f_s` with fixed rows.
struct Operator<'a> {
    grid: &'a Grid,
    chi: &'a [f64],
    chi_r: &'a [f64],
    alpha: Vec<f64>,
    beta: Vec<f64>,
    parity: ParityPair,
    fixed: usize,
}

impl Operator<'_> {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = f.len();
        let mut d1 = vec![0.0; m];
        let mut d2 = vec![0.0; m];
        self.grid.first_and_second(f, self.parity, &mut d1, &mut d2);
        (0..m)
            .map(|i| {
                if i == self.fixed {
                    return 0.0;
                }
                let x = self.chi[i];
                let fs = d1[i] / x;
                let fss = (d2[i] - self.chi_r[i] * fs) / (x * x);
                self.alpha[i] * fss + self.beta[i] * fs
            })
            .collect()
    }

    /// `I - c D` as a band matrix, assembled from `2w + 1` comb probes.
    fn shifted(&self, c: f64) -> Band {
        let m = self.chi.len();
        let w = self.grid.order().ghosts();
        let colors = 2 * w + 1;
        let mut a = Band::zeros(m, w);
        for color in 0..colors {
            let probe: Vec<f64> = (0..m).map(|j| if j % colors == color { 1.0 } else { 0.0 }).collect();
            let y = self.apply(&probe);
            for i in 0..m {
                let lo = i.saturating_sub(w);
                let hi = (i + w).min(m - 1);
                if let Some(j) = (lo..=hi).find(|j| j % colors == color) {
                    let id = if i == j { 1.0 } else { 0.0 };
                    a.set(i, j, id - c * y[i]);
                }
            }
        }
        a
    }
}

fn operators<'a>(p: &'a Profile, kin: &'a Kinematics) -> (Operator<'a>, Operator<'a>) {
    let m = p.chi().len();
    let last = m - 1;
    let nm2 = (p.dimension() - 2) as f64;
    let mut alpha_psi = vec![1.0; m];
    let mut beta_psi: Vec<f64> = kin.b.iter().map(|b| nm2 * b).collect();
    alpha_psi[0] = nm2 + 1.0;
    beta_psi[0] = 0.0;
    beta_psi[last] = 0.0;
    let mut alpha_phi = vec![1.0; m];
    let mut beta_phi = kin.a.clone();
    alpha_phi[last] = 2.0;
    beta_phi[last] = 0.0;
    beta_phi[0] = 0.0;
    let psi_op = Operator {
        grid: p.grid(),
        chi: p.chi(),
        chi_r: &kin.chi_r,
        alpha: alpha_psi,
        beta: beta_psi,
        parity: ParityPair::PSI,
        fixed: last,
    };
    let phi_op = Operator {
        grid: p.grid(),
        chi: p.chi(),
        chi_r: &kin.chi_r,
        alpha: alpha_phi,
        beta: beta_phi,
        parity: ParityPair::PHI,
        fixed: 0,
    };
    (psi_op, phi_op)
}

fn full_rates(p: &Profile, gauge: Gauge) -> Result<Rates> {
    let kin = Kinematics::from_profile(p);
    if let Some((node, name)) = kin.first_nonfinite() {
        return Err(Error::Numeric { node, what: format!("{name} is not finite") });
    }
    let rc = ricci_from(p.dimension(), &kin);
    let field = (gauge == Gauge::ProportionalArcLength).then(|| gauge_field_from(p.grid(), p.chi(), &rc));
    Ok(rates_from(p, &kin, &rc, field.as_ref()))
}

fn stage_profile(p: &Profile, chi: Vec<f64>, psi: Vec<f64>, phi: Vec<f64>) -> Result<Profile> {
    let last = chi.len() - 1;
    for (name, f) in [("chi", &chi), ("psi", &psi), ("phi", &phi)] {
        if let Some(i) = f.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric { node: i, what: format!("{name} is not finite") });
        }
    }
    let bad = chi
        .iter()
        .position(|&x| x <= 0.0)
        .map(|i| ("chi", i))
        .or_else(|| psi[..last].iter().position(|&x| x <= 0.0).map(|i| ("psi", i)));
    let bad = bad.or_else(|| phi[1..].iter().position(|&x| x <= 0.0).map(|i| ("phi", i + 1)));
    if let Some((name, i)) = bad {
        return Err(Error::StepRejected(format!("{name} turned non-positive at node {i}")));
    }
    Profile::new(p.grid_arc().clone(), p.dimension(), chi, psi, phi)
}

/// One ARS(2,2,2) step.
pub fn ars222_step(state: &FlowState, dt: f64, gauge: Gauge) -> Result<FlowState> {
    let p = &state.profile;
    let m = p.chi().len();
    let last = m - 1;
    let kin = Kinematics::from_profile(p);
    if let Some((node, name)) = kin.first_nonfinite() {
        return Err(Error::Numeric { node, what: format!("{name} is not finite") });
    }
    let (lpsi, lphi) = operators(p, &kin);
    let delta = 1.0 - 1.0 / (2.0 * GAMMA);

    // explicit parts E = F - D f at y_n
    let f1 = full_rates(p, gauge)?;
    let e1_psi: Vec<f64> = f1.psi.iter().zip(lpsi.apply(p.psi())).map(|(f, l)| f - l).collect();
    let e1_phi: Vec<f64> = f1.phi.iter().zip(lphi.apply(p.phi())).map(|(f, l)| f - l).collect();

    let apsi = lpsi.shifted(GAMMA * dt);
    let aphi = lphi.shifted(GAMMA * dt);

    let chi2: Vec<f64> = (0..m).map(|i| p.chi()[i] + GAMMA * dt * f1.chi[i]).collect();
    let mut psi2: Vec<f64> = (0..m).map(|i| p.psi()[i] + GAMMA * dt * e1_psi[i]).collect();
    let mut phi2: Vec<f64> = (0..m).map(|i| p.phi()[i] + GAMMA * dt * e1_phi[i]).collect();
    apsi.clone().solve(&mut psi2)?;
    aphi.clone().solve(&mut phi2)?;
    psi2[last] = 0.0;
    phi2[0] = 0.0;
    let y2 = stage_profile(p, chi2, psi2, phi2)?;

    let f2 = full_rates(&y2, gauge)?;
    let l2_psi = lpsi.apply(y2.psi());
    let l2_phi = lphi.apply(y2.phi());
    let chi3: Vec<f64> = (0..m).map(|i| p.chi()[i] + dt * (delta * f1.chi[i] + (1.0 - delta) * f2.chi[i])).collect();
    let mut psi3: Vec<f64> = (0..m)
        .map(|i| {
            let e2 = f2.psi[i] - l2_psi[i];
            p.psi()[i] + dt * (delta * e1_psi[i] + (1.0 - delta) * e2 + (1.0 - GAMMA) * l2_psi[i])
        })
        .collect();
    let mut phi3: Vec<f64> = (0..m)
        .map(|i| {
            let e2 = f2.phi[i] - l2_phi[i];
            p.phi()[i] + dt * (delta * e1_phi[i] + (1.0 - delta) * e2 + (1.0 - GAMMA) * l2_phi[i])
        })
        .collect();
    apsi.solve(&mut psi3)?;
    aphi.solve(&mut phi3)?;
    psi3[last] = 0.0;
    phi3[0] = 0.0;
    let profile = stage_profile(p, chi3, psi3, phi3)?;
    Ok(FlowState { time: state.time + dt, profile, step_index: state.step_index + 1, dt_last: dt })
}

/// Step from a relative-change limit: `eta / max |f_t / f|`, also capped by an
/// advective limit for the gauge drift and by `1000` explicit steps.
pub fn controlled_dt(p: &Profile, rates: &Rates, eta: f64, explicit_bound: f64) -> f64 {
    let m = p.chi().len();
    let last = m - 1;
    let mut rate = 0.0f64;
    for i in 0..m {
        rate = rate.max(abs(rates.chi[i] / p.chi()[i]));
        if i < last {
            rate = rate.max(abs(rates.psi[i] / p.psi()[i]));
        }
        if i > 0 {
            rate = rate.max(abs(rates.phi[i] / p.phi()[i]));
        }
    }
    let dt = if rate > 0.0 { eta / rate } else { f64::INFINITY };
    dt.min(1000.0 * explicit_bound).min(sqrt(eta) * 1e3)
}
