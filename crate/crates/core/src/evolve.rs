//! Time integration of the reduced flow
//!
//! ```text
//! chi_t = -chi Rc11,   psi_t = -psi Rc22,   phi_t = -phi Rc_ii
//! ```
//!
//! on the fixed mesh. Curvatures come from [`metric`](crate::metric), which
//! already carries the limits at both singular orbits, so the endpoint rows
//! of the system need no special casing here: `psi_t(0) = -(n-1) h K_top(0)`
//! and `phi_t(tip) = -d (2 K_1 + (n-3) L)` fall out of the same formulas.
//!
//! Two gauges are available. [`Gauge::Coordinate`] is the flow itself.
//! [`Gauge::ProportionalArcLength`] adds the tangential field that keeps the
//! arc-length density `chi` spatially uniform in ratio, i.e. `chi_t = -k chi`
//! with `k` the `chi`-weighted mean of `Rc11`. Node spacing in arc length then
//! shrinks uniformly, which keeps a long sausage resolved near its tip.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::diagnostics::{summary_from, GeoSummary, DEFAULT_GAP_WINDOW, MONITOR_TOL};
use crate::error::{config, Error, Result};
use crate::grid::{Grid, ParityPair};
use crate::imex;
use crate::math::{abs, max_of};
use crate::metric::{
    curvature_field_from, laplacian_with, ricci_from, validate_smoothness, Kinematics, Profile, RicciField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gauge {
    Coordinate,
    ProportionalArcLength,
}

impl Gauge {
    pub fn name(self) -> &'static str {
        match self {
            Gauge::Coordinate => "coordinate",
            Gauge::ProportionalArcLength => "proportional",
        }
    }

    pub fn parse(s: &str) -> Option<Gauge> {
        match s {
            "coordinate" => Some(Gauge::Coordinate),
            "proportional" => Some(Gauge::ProportionalArcLength),
            _ => None,
        }
    }
}

/// Time derivatives of the three warping functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub chi: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Tangential correction for the proportional gauge: `f_t += v f_s`, `chi_t = -k chi`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    pub k: f64,
    /// Arc-length velocity, odd at both ends.
    pub v: Vec<f64>,
}

fn check_kinematics(kin: &Kinematics) -> Result<()> {
    match kin.first_nonfinite() {
        Some((node, name)) => Err(Error::Numeric { node, what: format!("{name} is not finite") }),
        None => Ok(()),
    }
}

/// Flow velocity in the coordinate gauge.
pub fn rhs(p: &Profile) -> Result<Rates> {
    rhs_in_gauge(p, Gauge::Coordinate)
}

pub fn rhs_in_gauge(p: &Profile, gauge: Gauge) -> Result<Rates> {
    let kin = Kinematics::from_profile(p);
    check_kinematics(&kin)?;
    let rc = ricci_from(p.dimension(), &kin);
    let field = match gauge {
        Gauge::Coordinate => None,
        Gauge::ProportionalArcLength => Some(gauge_field_from(p.grid(), p.chi(), &rc)),
    };
    Ok(rates_from(p, &kin, &rc, field.as_ref()))
}

/// The proportional-gauge field of a profile.
pub fn gauge_field(p: &Profile) -> Result<GaugeField> {
    let kin = Kinematics::from_profile(p);
    check_kinematics(&kin)?;
    let rc = ricci_from(p.dimension(), &kin);
    Ok(gauge_field_from(p.grid(), p.chi(), &rc))
}

pub(crate) fn gauge_field_from(g: &Grid, chi: &[f64], rc: &RicciField) -> GaugeField {
    let weighted: Vec<f64> = chi.iter().zip(&rc.rc11).map(|(x, r)| x * r).collect();
    let c = g.cumulative_integral(&weighted, ParityPair::EVEN);
    let s = g.cumulative_integral(chi, ParityPair::EVEN);
    let last = chi.len() - 1;
    let k = c[last] / s[last];
    let mut v: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a - k * b).collect();
    v[0] = 0.0;
    v[last] = 0.0;
    GaugeField { k, v }
}

pub(crate) fn rates_from(p: &Profile, kin: &Kinematics, rc: &RicciField, field: Option<&GaugeField>) -> Rates {
    let m = p.chi().len();
    let last = m - 1;
    let mut chi = vec![0.0; m];
    let mut psi = vec![0.0; m];
    let mut phi = vec![0.0; m];
    for i in 0..m {
        chi[i] = -p.chi()[i] * rc.rc11[i];
        psi[i] = -p.psi()[i] * rc.rc22[i];
        phi[i] = -p.phi()[i] * rc.rc_ii[i];
    }
    if let Some(f) = field {
        for i in 0..m {
            chi[i] = -f.k * p.chi()[i];
            psi[i] += f.v[i] * kin.psi_s[i];
            phi[i] += f.v[i] * kin.phi_s[i];
        }
    }
    psi[last] = 0.0;
    phi[0] = 0.0;
    Rates { chi, psi, phi }
}

/// Explicit time step `cfl kappa min(ds)^2 / (2 (1 + B))`.
///
/// `B` bounds the effective diffusion and drift: at least `n - 2` and `1`
/// (the endpoint rows diffuse with coefficients `n - 1` and `2`), and at
/// least the largest cell Peclet number `(|psi_s/psi + (n-2) phi_s/phi| + |v|) ds / 2`
/// over interior nodes. `kappa` is `1` for the second-order stencil and `3/4`
/// for the fourth-order one, whose largest eigenvalue is `16/3` instead of `4`.
pub fn adaptive_dt(p: &Profile, cfl: f64) -> Result<f64> {
    check_cfl(cfl)?;
    let kin = Kinematics::from_profile(p);
    check_kinematics(&kin)?;
    Ok(stable_dt(p, &kin, None, cfl))
}

fn check_cfl(cfl: f64) -> Result<()> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(config(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    Ok(())
}

pub(crate) fn stable_dt(p: &Profile, kin: &Kinematics, field: Option<&GaugeField>, cfl: f64) -> f64 {
    let g = p.grid();
    let m = p.chi().len();
    let nm2 = (p.dimension() - 2) as f64;
    let mut ds_min = f64::INFINITY;
    let mut b = nm2.max(1.0);
    for i in 0..m {
        let ds = p.chi()[i] * g.spacing(i);
        ds_min = ds_min.min(ds);
        if i > 0 && i < m - 1 {
            let drift = abs(kin.a[i] + nm2 * kin.b[i]) + field.map_or(0.0, |f| abs(f.v[i]));
            b = b.max(0.5 * drift * ds);
        }
    }
    cfl * ds_min * ds_min / (2.0 * g.order().stiffness_factor() * (1.0 + b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub profile: Profile,
    pub step_index: u64,
    /// Last accepted step; `0` before the first one.
    pub dt_last: f64,
}

impl FlowState {
    pub fn initial(profile: Profile) -> FlowState {
        FlowState { time: 0.0, profile, step_index: 0, dt_last: 0.0 }
    }
}

fn positivity(chi: &[f64], psi: &[f64], phi: &[f64]) -> Result<()> {
    let last = chi.len() - 1;
    for (name, f) in [("chi", chi), ("psi", psi), ("phi", phi)] {
        if let Some(i) = f.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric { node: i, what: format!("{name} is not finite") });
        }
    }
    if let Some(i) = chi.iter().position(|&x| x <= 0.0) {
        return Err(Error::StepRejected(format!("chi turned non-positive at node {i}")));
    }
    if let Some(i) = psi[..last].iter().position(|&x| x <= 0.0) {
        return Err(Error::StepRejected(format!("psi turned non-positive at node {i}")));
    }
    if let Some(i) = phi[1..].iter().position(|&x| x <= 0.0) {
        return Err(Error::StepRejected(format!("phi turned non-positive at node {}", i + 1)));
    }
    Ok(())
}

fn axpy(base: &[f64], dt: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(b, r)| b + dt * r).collect()
}

fn heun(base: &[f64], dt: f64, k1: &[f64], k2: &[f64]) -> Vec<f64> {
    (0..base.len()).map(|i| base[i] + 0.5 * dt * (k1[i] + k2[i])).collect()
}

/// One Heun (RK2) step in the coordinate gauge.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    step_in(state, dt, Gauge::Coordinate)
}

/// One Heun step. Rejects `dt` above the `cfl = 1` bound.
pub fn step_in(state: &FlowState, dt: f64, gauge: Gauge) -> Result<FlowState> {
    let p = &state.profile;
    let kin = Kinematics::from_profile(p);
    check_kinematics(&kin)?;
    let rc = ricci_from(p.dimension(), &kin);
    let field = (gauge == Gauge::ProportionalArcLength).then(|| gauge_field_from(p.grid(), p.chi(), &rc));
    let bound = stable_dt(p, &kin, field.as_ref(), 1.0);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepRejected(format!("dt = {dt:e} exceeds the stability bound {bound:e}")));
    }
    let k1 = rates_from(p, &kin, &rc, field.as_ref());
    heun_from(state, dt, gauge, &k1)
}

fn heun_from(state: &FlowState, dt: f64, gauge: Gauge, k1: &Rates) -> Result<FlowState> {
    let p = &state.profile;
    let last = p.chi().len() - 1;
    let chi1 = axpy(p.chi(), dt, &k1.chi);
    let psi1 = axpy(p.psi(), dt, &k1.psi);
    let phi1 = axpy(p.phi(), dt, &k1.phi);
    positivity(&chi1, &psi1, &phi1)?;
    let kin1 = Kinematics::new(p.grid(), &chi1, &psi1, &phi1);
    check_kinematics(&kin1)?;
    let rc1 = ricci_from(p.dimension(), &kin1);
    let field1 = (gauge == Gauge::ProportionalArcLength).then(|| gauge_field_from(p.grid(), &chi1, &rc1));
    let stage = Profile::new(p.grid_arc().clone(), p.dimension(), chi1, psi1, phi1)?;
    let k2 = rates_from(&stage, &kin1, &rc1, field1.as_ref());
    let chi = heun(p.chi(), dt, &k1.chi, &k2.chi);
    let mut psi = heun(p.psi(), dt, &k1.psi, &k2.psi);
    let mut phi = heun(p.phi(), dt, &k1.phi, &k2.phi);
    psi[last] = 0.0;
    phi[0] = 0.0;
    positivity(&chi, &psi, &phi)?;
    let profile = Profile::new(p.grid_arc().clone(), p.dimension(), chi, psi, phi)?;
    Ok(FlowState { time: state.time + dt, profile, step_index: state.step_index + 1, dt_last: dt })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    Extinction,
    TEndReached,
    InvariantViolation,
    NumericFailure,
}

impl TerminationReason {
    pub fn tag(self) -> &'static str {
        match self {
            TerminationReason::Extinction => "extinction",
            TerminationReason::TEndReached => "t_end_reached",
            TerminationReason::InvariantViolation => "invariant_violation",
            TerminationReason::NumericFailure => "numeric_failure",
        }
    }

    pub fn parse(s: &str) -> Option<TerminationReason> {
        [
            TerminationReason::Extinction,
            TerminationReason::TEndReached,
            TerminationReason::InvariantViolation,
            TerminationReason::NumericFailure,
        ]
        .into_iter()
        .find(|r| r.tag() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub cfl: f64,
    /// Stop at this simulation time; `None` runs to extinction.
    pub t_end: Option<f64>,
    /// Record a summary every this many accepted steps.
    pub monitor_every: u64,
    /// Keep a state every this many summaries.
    pub snapshot_every: u64,
    pub gauge: Gauge,
    pub imex: bool,
    /// Relative change per step allowed by the IMEX controller.
    pub imex_eta: f64,
    /// Extinction once max scalar curvature exceeds this multiple of its initial value.
    pub curvature_cap: f64,
    /// Extinction once the section area falls below this fraction of its initial value.
    pub area_floor: f64,
    pub max_steps: u64,
    pub max_rejections: u32,
    pub enforce_monitors: bool,
    pub monitor_tol: f64,
    pub smoothness_tol: f64,
    pub gap_window: f64,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            cfl: 0.9,
            t_end: None,
            monitor_every: 100,
            snapshot_every: 10,
            gauge: Gauge::Coordinate,
            imex: false,
            imex_eta: 1e-3,
            curvature_cap: 1e6,
            area_floor: 1e-3,
            max_steps: 50_000_000,
            max_rejections: 20,
            enforce_monitors: true,
            monitor_tol: MONITOR_TOL,
            smoothness_tol: 1e-3,
            gap_window: DEFAULT_GAP_WINDOW,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check_cfl(self.cfl)?;
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config(format!("t_end must be positive, got {t}")));
            }
        }
        if self.monitor_every == 0 || self.snapshot_every == 0 {
            return Err(config("monitor and snapshot cadences must be positive"));
        }
        if !(self.curvature_cap > 1.0) {
            return Err(config(format!("curvature_cap must exceed 1, got {}", self.curvature_cap)));
        }
        if !(self.area_floor > 0.0 && self.area_floor < 1.0) {
            return Err(config(format!("area_floor must lie in (0, 1), got {}", self.area_floor)));
        }
        if !(self.imex_eta > 0.0 && self.imex_eta <= 0.1) {
            return Err(config(format!("imex_eta must lie in (0, 0.1], got {}", self.imex_eta)));
        }
        if self.max_steps == 0 || self.max_rejections == 0 {
            return Err(config("max_steps and max_rejections must be positive"));
        }
        if !(self.monitor_tol >= 0.0 && self.smoothness_tol > 0.0) {
            return Err(config("tolerances must be non-negative"));
        }
        if !(self.gap_window > 0.0) {
            return Err(config(format!("gap_window must be positive, got {}", self.gap_window)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub dimension: usize,
    pub gauge: Gauge,
    pub states: Vec<FlowState>,
    pub summaries: Vec<GeoSummary>,
    pub extinction_time: Option<f64>,
    pub termination_reason: TerminationReason,
    /// Human-readable reason for a non-extinction stop.
    pub diagnostic: Option<String>,
    pub steps: u64,
    pub rejections: u64,
}

impl FlowTrajectory {
    pub fn final_state(&self) -> Option<&FlowState> {
        self.states.last()
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub reason: TerminationReason,
    pub diagnostic: Option<String>,
    pub extinction_time: Option<f64>,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationParts {
    pub config: RunConfig,
    pub state: FlowState,
    pub area0: f64,
    pub sc0: f64,
    pub summaries: Vec<GeoSummary>,
    /// `(time, area)` samples, one per 2% drop in area.
    pub area_history: Vec<(f64, f64)>,
    pub rejections: u64,
    pub outcome: Option<Outcome>,
}

/// A run that can be advanced in chunks, inspected and checkpointed.
#[derive(Clone, Debug)]
pub struct Simulation {
    parts: SimulationParts,
    snapshots: Vec<FlowState>,
}

const HISTORY_DROP: f64 = 0.98;

fn section_area(p: &Profile) -> f64 {
    let integrand: Vec<f64> = p.chi().iter().zip(p.psi()).map(|(a, b)| a * b).collect();
    4.0 * crate::math::PI * p.grid().integrate(&integrand)
}

impl Simulation {
    pub fn new(initial: Profile, config: RunConfig) -> Result<Simulation> {
        config.validate()?;
        let report = validate_smoothness(&initial, config.smoothness_tol);
        if !report.passed() {
            let worst = report.failures().next().map(|c| c.condition.describe()).unwrap_or("");
            return Err(Error::Data(format!("initial profile is not smooth: {worst}")));
        }
        let kin = Kinematics::from_profile(&initial);
        check_kinematics(&kin)?;
        let sc0 = max_of(&ricci_from(initial.dimension(), &kin).scalar);
        let area0 = section_area(&initial);
        let parts = SimulationParts {
            config,
            state: FlowState::initial(initial),
            area0,
            sc0,
            summaries: Vec::new(),
            area_history: vec![(0.0, area0)],
            rejections: 0,
            outcome: None,
        };
        Ok(Simulation { parts, snapshots: Vec::new() })
    }

    pub fn from_parts(parts: SimulationParts) -> Result<Simulation> {
        parts.config.validate()?;
        Ok(Simulation { parts, snapshots: Vec::new() })
    }

    pub fn parts(&self) -> &SimulationParts {
        &self.parts
    }

    pub fn into_parts(self) -> SimulationParts {
        self.parts
    }

    pub fn state(&self) -> &FlowState {
        &self.parts.state
    }

    pub fn config(&self) -> &RunConfig {
        &self.parts.config
    }

    pub fn summaries(&self) -> &[GeoSummary] {
        &self.parts.summaries
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.parts.outcome.as_ref()
    }

    /// Snapshots taken since the last call.
    pub fn take_snapshots(&mut self) -> Vec<FlowState> {
        core::mem::take(&mut self.snapshots)
    }

    fn stop(&mut self, reason: TerminationReason, diagnostic: Option<String>, extinction_time: Option<f64>) {
        self.parts.outcome = Some(Outcome { reason, diagnostic, extinction_time });
    }

    fn record(&mut self, kin: &Kinematics) -> Result<()> {
        let st = &self.parts.state;
        let sm = summary_from(&st.profile, kin, st.time, st.step_index, self.parts.config.gap_window)?;
        let k = self.parts.summaries.len() as u64;
        self.parts.summaries.push(sm);
        if k % self.parts.config.snapshot_every == 0 {
            self.snapshots.push(st.clone());
        }
        Ok(())
    }

    fn last_recorded_step(&self) -> Option<u64> {
        self.parts.summaries.last().map(|s| s.step)
    }

    /// Checks run on each recorded summary. Returns a violation message.
    fn audit_monitors(&self) -> Option<String> {
        let cfg = &self.parts.config;
        let report = validate_smoothness(&self.parts.state.profile, cfg.smoothness_tol);
        if let Some(c) = report.failures().next() {
            return Some(format!("smoothness: {} (violation {:e})", c.condition.describe(), c.violation));
        }
        if cfg.enforce_monitors {
            let sm = self.parts.summaries.last()?;
            let names = ["K_top - K_2", "K_2 - K_1", "K_1 - L", "L"];
            for (m, name) in sm.ordering_margins.iter().zip(names) {
                if !(*m >= -cfg.monitor_tol) {
                    return Some(format!("ordering {name} >= 0 breached: margin {m:e}"));
                }
            }
            let names = ["(K_top)_s", "(K_1)_s", "(K_2)_s", "L_s"];
            for (m, name) in sm.gradient_margins.iter().zip(names) {
                if !(*m >= -cfg.monitor_tol) {
                    return Some(format!("gradient {name} >= 0 breached: margin {m:e}"));
                }
            }
        }
        None
    }

    fn extrapolate_extinction(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.parts.area_history.clone();
        let st = &self.parts.state;
        let a = section_area(&st.profile);
        if pts.last().map_or(true, |p| p.0 < st.time) {
            pts.push((st.time, a));
        }
        extinction_from_area(&pts)
    }

    /// Advances at most `max_steps` accepted steps. Returns the outcome once finished.
    pub fn advance(&mut self, max_steps: u64) -> Option<&Outcome> {
        for _ in 0..max_steps {
            if self.parts.outcome.is_some() {
                break;
            }
            self.tick();
        }
        self.parts.outcome.as_ref()
    }

    /// Runs until the simulation finishes.
    pub fn run_to_end(&mut self) -> &Outcome {
        while self.parts.outcome.is_none() {
            self.tick();
        }
        self.parts.outcome.as_ref().unwrap()
    }

    fn tick(&mut self) {
        let cfg = self.parts.config.clone();
        let st = self.parts.state.clone();
        let p = &st.profile;
        let kin = Kinematics::from_profile(p);
        if let Err(e) = check_kinematics(&kin) {
            self.stop(TerminationReason::NumericFailure, Some(format!("{e}")), None);
            return;
        }
        let rc = ricci_from(p.dimension(), &kin);

        let due = st.step_index % cfg.monitor_every == 0 && self.last_recorded_step() != Some(st.step_index);
        if due {
            if let Err(e) = self.record(&kin) {
                self.stop(TerminationReason::NumericFailure, Some(format!("{e}")), None);
                return;
            }
            if let Some(msg) = self.audit_monitors() {
                self.stop(TerminationReason::InvariantViolation, Some(msg), None);
                return;
            }
        }

        let area = section_area(p);
        let sc_max = max_of(&rc.scalar);
        if area < cfg.area_floor * self.parts.area0 || sc_max > cfg.curvature_cap * self.parts.sc0 {
            if self.last_recorded_step() != Some(st.step_index) {
                if let Err(e) = self.record(&kin) {
                    self.stop(TerminationReason::NumericFailure, Some(format!("{e}")), None);
                    return;
                }
            }
            let t = self.extrapolate_extinction();
            self.stop(TerminationReason::Extinction, None, Some(t));
            return;
        }
        if let Some(t_end) = cfg.t_end {
            if st.time >= t_end * (1.0 - 1e-14) {
                if self.last_recorded_step() != Some(st.step_index) {
                    let _ = self.record(&kin);
                }
                self.stop(TerminationReason::TEndReached, None, None);
                return;
            }
        }
        if st.step_index >= cfg.max_steps {
            self.stop(
                TerminationReason::NumericFailure,
                Some(format!("step budget of {} exhausted", cfg.max_steps)),
                None,
            );
            return;
        }

        let field = (cfg.gauge == Gauge::ProportionalArcLength).then(|| gauge_field_from(p.grid(), p.chi(), &rc));
        let mut dt = if cfg.imex {
            let rates = rates_from(p, &kin, &rc, field.as_ref());
            imex::controlled_dt(p, &rates, cfg.imex_eta, stable_dt(p, &kin, field.as_ref(), 1.0))
        } else {
            stable_dt(p, &kin, field.as_ref(), cfg.cfl)
        };
        if let Some(t_end) = cfg.t_end {
            dt = dt.min(t_end - st.time);
        }
        let k1 = (!cfg.imex).then(|| rates_from(p, &kin, &rc, field.as_ref()));
        let mut rejections = 0u32;
        loop {
            let attempt = match &k1 {
                Some(k1) => heun_from(&st, dt, cfg.gauge, k1),
                None => imex::ars222_step(&st, dt, cfg.gauge),
            };
            match attempt {
                Ok(next) => {
                    self.parts.state = next;
                    break;
                }
                Err(Error::StepRejected(msg)) => {
                    rejections += 1;
                    self.parts.rejections += 1;
                    if rejections > cfg.max_rejections {
                        self.stop(
                            TerminationReason::NumericFailure,
                            Some(format!("{} rejections at t = {}: {msg}", rejections - 1, st.time)),
                            None,
                        );
                        return;
                    }
                    dt *= 0.5;
                }
                Err(e) => {
                    self.stop(TerminationReason::NumericFailure, Some(format!("{e}")), None);
                    return;
                }
            }
        }
        let st = &self.parts.state;
        let a = section_area(&st.profile);
        if a <= HISTORY_DROP * self.parts.area_history.last().map_or(f64::INFINITY, |p| p.1) {
            self.parts.area_history.push((st.time, a));
        }
    }

    /// Consumes the simulation into a trajectory. Unfinished runs are reported as
    /// having exhausted their step budget.
    pub fn finish(mut self) -> FlowTrajectory {
        if self.parts.outcome.is_none() {
            self.stop(TerminationReason::NumericFailure, Some(String::from("run not finished")), None);
        }
        let outcome = self.parts.outcome.clone().unwrap();
        let st = self.parts.state.clone();
        if self.snapshots.last().map(|s| s.step_index) != Some(st.step_index) {
            self.snapshots.push(st.clone());
        }
        FlowTrajectory {
            dimension: st.profile.dimension(),
            gauge: self.parts.config.gauge,
            states: self.snapshots,
            summaries: self.parts.summaries,
            extinction_time: outcome.extinction_time,
            termination_reason: outcome.reason,
            diagnostic: outcome.diagnostic,
            steps: st.step_index,
            rejections: self.parts.rejections,
        }
    }
}

/// Time at which the area reaches zero, from a quadratic in `A` through the
/// last three samples of `t(A)` (linear with two samples).
pub fn extinction_from_area(pts: &[(f64, f64)]) -> f64 {
    match pts.len() {
        0 => f64::NAN,
        1 => pts[0].0,
        2 => {
            let (t0, a0) = pts[0];
            let (t1, a1) = pts[1];
            t1 - a1 * (t1 - t0) / (a1 - a0)
        }
        m => {
            let (t0, a0) = pts[m - 3];
            let (t1, a1) = pts[m - 2];
            let (t2, a2) = pts[m - 1];
            t0 * a1 * a2 / ((a0 - a1) * (a0 - a2))
                + t1 * a0 * a2 / ((a1 - a0) * (a1 - a2))
                + t2 * a0 * a1 / ((a2 - a0) * (a2 - a1))
        }
    }
}

/// Runs `initial` under `config` to completion.
pub fn run(initial: Profile, config: RunConfig) -> Result<FlowTrajectory> {
    let mut sim = Simulation::new(initial, config)?;
    sim.run_to_end();
    Ok(sim.finish())
}

/// Right-hand sides of `(d_t - Delta) f = R` for the four curvatures and the
/// `s`-derivatives of `K_top` and `K_1`, each including the Laplacian, so that
/// along an exact flow `d_t f = R` at fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureRhs {
    pub k_top: Vec<f64>,
    pub k1_perp: Vec<f64>,
    pub k2_perp: Vec<f64>,
    pub l_sec: Vec<f64>,
    pub k_top_s: Vec<f64>,
    pub k1_perp_s: Vec<f64>,
}

pub fn curvature_evolution_rhs(p: &Profile) -> Result<CurvatureRhs> {
    let kin = Kinematics::from_profile(p);
    let c = curvature_field_from(p, &kin)?;
    let g = p.grid();
    let m = c.k_top.len();
    let last = m - 1;
    let n = p.dimension() as f64;
    let (nm2, nm3) = (n - 2.0, n - 3.0);
    let lap = |f: &[f64], par| laplacian_with(p, &kin, f, par);
    let (lkt, lk1, lk2, ll) = (
        lap(&c.k_top, ParityPair::EVEN),
        lap(&c.k1_perp, ParityPair::EVEN),
        lap(&c.k2_perp, ParityPair::EVEN),
        lap(&c.l_sec, ParityPair::EVEN),
    );
    let (lkts, lk1s) = (lap(&c.k_top_s, ParityPair::ODD), lap(&c.k1_perp_s, ParityPair::ODD));
    let mut r = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    for i in 1..last {
        let (kt, k1, k2, l) = (c.k_top[i], c.k1_perp[i], c.k2_perp[i], c.l_sec[i]);
        let (a, b) = (kin.a[i], kin.b[i]);
        let (a2, b2) = (a * a, b * b);
        let (kts, k1s, k2s, ls) = (c.k_top_s[i], c.k1_perp_s[i], c.k2_perp_s_id[i], c.l_sec_s_id[i]);
        r[0][i] = 2.0 * (kt * kt + nm2 * k1 * k2) - 2.0 * nm2 * b2 * (kt - k2);
        r[1][i] = 2.0 * (k1 * k1 + kt * k2 + nm3 * k1 * l) + 2.0 * a2 * (k2 - k1) - 2.0 * nm3 * b2 * (k1 - l);
        r[2][i] = 2.0 * (k2 * k2 + kt * k1 + nm3 * k2 * l) - 2.0 * a2 * (k2 - k1) + 2.0 * b2 * (kt - k2);
        r[3][i] = 2.0 * (k1 * k1 + k2 * k2 + nm3 * l * l) + 4.0 * b2 * (k1 - l);
        r[4][i] = (4.0 * kt - a2 - 3.0 * nm2 * b2) * kts
            + 2.0 * nm2 * k2 * k1s
            + 2.0 * nm2 * (k1 + b2) * k2s
            + 4.0 * nm2 * b * (b2 + k1) * (kt - k2);
        r[5][i] = (4.0 * k1 + 2.0 * nm3 * l - 3.0 * a2 - (3.0 * n - 8.0) * b2) * k1s
            + 2.0 * k2 * kts
            + 2.0 * (kt + a2) * k2s
            + 2.0 * nm3 * (k1 + b2) * ls
            - 4.0 * a * (kt + a2) * (k2 - k1)
            + 4.0 * nm3 * b * (k1 + b2) * (k1 - l);
    }
    // reaction terms of the scalar equations are even: fill the endpoints by extrapolation
    for f in r.iter_mut().take(4) {
        f[0] = g.extrapolate_even_to_waist(f);
        f[last] = g.extrapolate_even_to_tip(f);
    }
    let [mut rk, mut r1, mut r2, mut rl, mut rks, mut r1s] = r;
    for i in 0..m {
        rk[i] += lkt[i];
        r1[i] += lk1[i];
        r2[i] += lk2[i];
        rl[i] += ll[i];
        if i > 0 && i < last {
            rks[i] += lkts[i];
            r1s[i] += lk1s[i];
        }
    }
    Ok(CurvatureRhs { k_top: rk, k1_perp: r1, k2_perp: r2, l_sec: rl, k_top_s: rks, k1_perp_s: r1s })
}

/// Replaces a profile's grid, keeping the samples.
pub fn with_grid(p: &Profile, grid: Arc<Grid>) -> Result<Profile> {
    Profile::new(grid, p.dimension(), p.chi().to_vec(), p.psi().to_vec(), p.phi().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Mesh, SchemeOrder};
    use crate::initial_data::{hypersausage_exact, round_sphere, sausage_slice};
    use crate::math::{cos, sqrt};

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(n, Mesh::Uniform, SchemeOrder::Fourth).unwrap())
    }

    #[test]
    fn round_sphere_rates() {
        for n in [3usize, 5] {
            let p = round_sphere(2.0, &grid(101), n).unwrap();
            let r = rhs(&p).unwrap();
            for i in 0..101 {
                let expect = -((n - 1) as f64) * p.psi()[i] / 4.0;
                assert!((r.psi[i] - expect).abs() < 1e-8, "n={n} i={i} {} {expect}", r.psi[i]);
            }
            assert_eq!(r.psi[100], 0.0);
            assert_eq!(r.phi[0], 0.0);
        }
    }

    #[test]
    fn proportional_gauge_matches_on_the_round_sphere() {
        let p = round_sphere(1.0, &grid(101), 4).unwrap();
        let f = gauge_field(&p).unwrap();
        assert!((f.k - 3.0).abs() < 1e-8);
        assert!(f.v.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn gauge_field_vanishes_at_both_ends() {
        let p = sausage_slice(-1.0, 3, &grid(101)).unwrap();
        let f = gauge_field(&p).unwrap();
        assert_eq!(f.v[0], 0.0);
        assert_eq!(f.v[100], 0.0);
        assert!(f.v.iter().any(|v| v.abs() > 1e-4));
    }

    #[test]
    fn dt_guards_and_scaling() {
        let p = round_sphere(1.0, &grid(401), 3).unwrap();
        assert!(matches!(adaptive_dt(&p, 0.0), Err(Error::Config(_))));
        assert!(matches!(adaptive_dt(&p, 1.5), Err(Error::Config(_))));
        let dt = adaptive_dt(&p, 0.5).unwrap();
        let ds = crate::math::FRAC_PI_2 / 400.0;
        assert!((dt - 0.5 * 0.75 * ds * ds / 4.0).abs() < 1e-12 * dt);
        let coarse = adaptive_dt(&round_sphere(1.0, &grid(201), 3).unwrap(), 0.5).unwrap();
        assert!((coarse / dt - 4.0).abs() < 0.05);
        let st = FlowState::initial(p);
        let bound = adaptive_dt(&st.profile, 1.0).unwrap();
        assert!(matches!(step(&st, 10.0 * bound), Err(Error::StepRejected(_))));
        assert!(step(&st, bound).is_ok());
    }

    #[test]
    fn round_sphere_shrinks_at_the_exact_rate() {
        let p = round_sphere(1.0, &grid(401), 3).unwrap();
        let cfg = RunConfig { t_end: Some(0.1), cfl: 0.9, monitor_every: 1000, ..RunConfig::default() };
        let traj = run(p, cfg).unwrap();
        assert_eq!(traj.termination_reason, TerminationReason::TEndReached);
        let st = traj.final_state().unwrap();
        assert!((st.time - 0.1).abs() < 1e-15);
        let rho = sqrt(1.0 - 0.4);
        let r = st.profile.grid().nodes();
        let err = (0..400)
            .map(|i| ((st.profile.psi()[i] - rho * cos(r[i])) / (rho * cos(r[i]))).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn hypersausage_rates_match_time_derivative() {
        let g = grid(401);
        let p = hypersausage_exact(-1.0, &g).unwrap();
        let r = rhs(&p).unwrap();
        let h = 1e-4;
        let pp = hypersausage_exact(-1.0 + h, &g).unwrap();
        let pm = hypersausage_exact(-1.0 - h, &g).unwrap();
        for i in 0..401 {
            let dpsi = (pp.psi()[i] - pm.psi()[i]) / (2.0 * h);
            let dphi = (pp.phi()[i] - pm.phi()[i]) / (2.0 * h);
            let dchi = (pp.chi()[i] - pm.chi()[i]) / (2.0 * h);
            assert!((r.psi[i] - dpsi).abs() < 1e-6, "psi {i}: {} {dpsi}", r.psi[i]);
            assert!((r.phi[i] - dphi).abs() < 1e-6, "phi {i}: {} {dphi}", r.phi[i]);
            assert!((r.chi[i] - dchi).abs() < 1e-6, "chi {i}: {} {dchi}", r.chi[i]);
        }
    }

    #[test]
    fn area_extrapolation_is_exact_for_quadratics() {
        let t = |a: f64| 0.25 - 0.02 * a + 0.001 * a * a;
        let pts = [(t(3.0), 3.0), (t(2.0), 2.0), (t(1.0), 1.0)];
        assert!((extinction_from_area(&pts) - 0.25).abs() < 1e-15);
        assert!((extinction_from_area(&pts[1..]) - t(0.0)).abs() < 2e-3);
    }

    #[test]
    fn constant_curvature_rhs() {
        let p = round_sphere(2.0, &grid(401), 3).unwrap();
        let c = curvature_evolution_rhs(&p).unwrap();
        // Laplacian of a discrete curvature: rounding enters as eps / ds^4
        let ds = 2.0 * crate::math::FRAC_PI_2 / 400.0;
        let floor = 64.0 * f64::EPSILON / (ds * ds * ds * ds);
        // d/dt rho^{-2} with rho^2 = 4 - 4t
        for f in [&c.k_top, &c.k1_perp, &c.k2_perp, &c.l_sec] {
            assert!(f.iter().all(|v| (v - 4.0 / 16.0).abs() < floor), "{:?}", &f[..3]);
        }
        // one more derivative for the gradient equations
        assert!(c.k_top_s.iter().chain(&c.k1_perp_s).all(|v| v.abs() < floor / ds));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        for bad in [
            RunConfig { cfl: 0.0, ..RunConfig::default() },
            RunConfig { monitor_every: 0, ..RunConfig::default() },
            RunConfig { area_floor: 1.0, ..RunConfig::default() },
            RunConfig { t_end: Some(-1.0), ..RunConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
