//! Audits of trajectories against exact solutions and known bounds.
//!
//! Bounds are stated in *paper time*, where extinction happens at `t = 0`.
//! [`paper_time`] is the only place where that shift is applied.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::evolve::{
    adaptive_dt, curvature_evolution_rhs, gauge_field, run, FlowState, FlowTrajectory, Gauge, RunConfig,
};
use crate::grid::{Grid, Mesh, ParityPair, SchemeOrder};
use crate::initial_data::{hypersausage_exact, round_sphere};
use crate::math::{abs, ln, sqrt, FRAC_PI_2, PI};
use crate::metric::{sectional_curvatures, Profile};
use crate::GeoSummary;

/// Simulation time shifted so that extinction is at `0`.
pub fn paper_time(t_sim: f64, extinction_time: f64) -> f64 {
    t_sim - extinction_time
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleKind {
    /// Shrinking round sphere `rho(t)^2 = rho0^2 - 2(n-1) t`.
    RoundSphere { n: usize, rho0: f64 },
    /// The exact `O(2) x O(2)` ancient flow on `S^3`.
    Hypersausage,
}

impl OracleKind {
    pub fn name(&self) -> String {
        match self {
            OracleKind::RoundSphere { n, .. } => format!("round_sphere_n{n}"),
            OracleKind::Hypersausage => "hypersausage".to_string(),
        }
    }

    fn profile(&self, t: f64, grid: &Arc<Grid>) -> Result<Profile> {
        match *self {
            OracleKind::RoundSphere { n, rho0 } => {
                let rho2 = rho0 * rho0 - 2.0 * (n - 1) as f64 * t;
                if !(rho2 > 0.0) {
                    return Err(config(format!("round sphere is extinct at t = {t}")));
                }
                round_sphere(sqrt(rho2), grid, n)
            }
            OracleKind::Hypersausage => hypersausage_exact(t, grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub nodes: Vec<usize>,
    pub order: SchemeOrder,
    pub mesh: Mesh,
    /// Oracle time of the initial slice.
    pub t0: f64,
    pub t1: f64,
    pub cfl: f64,
}

impl OracleConfig {
    pub fn hypersausage() -> OracleConfig {
        OracleConfig {
            kind: OracleKind::Hypersausage,
            nodes: vec![101, 201, 401],
            order: SchemeOrder::Fourth,
            mesh: Mesh::Uniform,
            t0: -2.0,
            t1: -1.0,
            cfl: 0.9,
        }
    }

    pub fn round_sphere(n: usize) -> OracleConfig {
        OracleConfig {
            kind: OracleKind::RoundSphere { n, rho0: 1.0 },
            t0: 0.0,
            t1: 0.1,
            ..OracleConfig::hypersausage()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub nodes: usize,
    /// Max relative error of `psi` away from the tip.
    pub err_psi: f64,
    /// Max relative error of `phi` away from the waist.
    pub err_phi: f64,
    pub steps: u64,
}

impl ErrorRow {
    pub fn max(&self) -> f64 {
        self.err_psi.max(self.err_phi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub oracle: String,
    pub order: SchemeOrder,
    pub rows: Vec<ErrorRow>,
    /// `log2` of successive error ratios.
    pub observed_orders: Vec<f64>,
}

impl ErrorTable {
    pub fn finest_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, ErrorRow::max)
    }

    pub fn min_order(&self) -> f64 {
        self.observed_orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn observed_orders(nodes: &[usize], errs: &[f64]) -> Vec<f64> {
    (1..errs.len())
        .map(|k| {
            let ratio = (nodes[k] - 1) as f64 / (nodes[k - 1] - 1) as f64;
            ln(errs[k - 1] / errs[k]) / ln(ratio)
        })
        .collect()
}

/// Runs the explicit stepper from the oracle at `t0` to `t1` on each grid.
pub fn oracle_error(cfg: &OracleConfig) -> Result<ErrorTable> {
    if cfg.nodes.len() < 2 {
        return Err(config("a refinement ladder needs at least two grids"));
    }
    if !(cfg.t1 > cfg.t0) {
        return Err(config(format!("oracle interval [{}, {}] is empty", cfg.t0, cfg.t1)));
    }
    let mut rows = Vec::with_capacity(cfg.nodes.len());
    for &m in &cfg.nodes {
        let grid = Arc::new(Grid::new(m, cfg.mesh, cfg.order)?);
        let start = cfg.kind.profile(cfg.t0, &grid)?;
        let exact = cfg.kind.profile(cfg.t1, &grid)?;
        let run_cfg = RunConfig {
            cfl: cfg.cfl,
            t_end: Some(cfg.t1 - cfg.t0),
            monitor_every: u64::MAX / 2,
            enforce_monitors: false,
            ..RunConfig::default()
        };
        let traj = run(start, run_cfg)?;
        let st = traj.final_state().ok_or_else(|| config("empty trajectory"))?;
        if traj.termination_reason != crate::TerminationReason::TEndReached {
            return Err(Error::Numeric {
                node: 0,
                what: format!("oracle run stopped early: {}", traj.diagnostic.clone().unwrap_or_default()),
            });
        }
        let (err_psi, err_phi) = relative_errors(&st.profile, &exact);
        rows.push(ErrorRow { nodes: m, err_psi, err_phi, steps: traj.steps });
    }
    let errs: Vec<f64> = rows.iter().map(ErrorRow::max).collect();
    Ok(ErrorTable {
        oracle: cfg.kind.name(),
        order: cfg.order,
        observed_orders: observed_orders(&cfg.nodes, &errs),
        rows,
    })
}

fn relative_errors(p: &Profile, exact: &Profile) -> (f64, f64) {
    let m = p.chi().len();
    let mut ep = 0.0f64;
    let mut ef = 0.0f64;
    for i in 0..m {
        if i < m - 1 {
            ep = ep.max(abs(p.psi()[i] / exact.psi()[i] - 1.0));
        }
        if i > 0 {
            ef = ef.max(abs(p.phi()[i] / exact.phi()[i] - 1.0));
        }
    }
    (ep, ef)
}

/// The curvature evolution equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurvatureEquation {
    KTop,
    K1,
    K2,
    L,
    KTopGradient,
    K1Gradient,
}

impl CurvatureEquation {
    pub const ALL: [CurvatureEquation; 6] = [
        CurvatureEquation::KTop,
        CurvatureEquation::K1,
        CurvatureEquation::K2,
        CurvatureEquation::L,
        CurvatureEquation::KTopGradient,
        CurvatureEquation::K1Gradient,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CurvatureEquation::KTop => "k_top",
            CurvatureEquation::K1 => "k1_perp",
            CurvatureEquation::K2 => "k2_perp",
            CurvatureEquation::L => "l_sec",
            CurvatureEquation::KTopGradient => "k_top_s",
            CurvatureEquation::K1Gradient => "k1_perp_s",
        }
    }

    pub fn parse(s: &str) -> Option<CurvatureEquation> {
        CurvatureEquation::ALL.into_iter().find(|e| e.tag() == s)
    }

    fn parity(self) -> ParityPair {
        match self {
            CurvatureEquation::KTopGradient | CurvatureEquation::K1Gradient => ParityPair::ODD,
            _ => ParityPair::EVEN,
        }
    }
}

fn curvature_array(p: &Profile, eq: CurvatureEquation) -> Result<Vec<f64>> {
    let c = sectional_curvatures(p)?;
    Ok(match eq {
        CurvatureEquation::KTop => c.k_top,
        CurvatureEquation::K1 => c.k1_perp,
        CurvatureEquation::K2 => c.k2_perp,
        CurvatureEquation::L => c.l_sec,
        CurvatureEquation::KTopGradient => c.k_top_s,
        CurvatureEquation::K1Gradient => c.k1_perp_s,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRow {
    pub equation: CurvatureEquation,
    /// Max over interior nodes and interior snapshots of `|d_t f - v f_s - R|`.
    pub max_residual: f64,
    /// Max of `|R|` over the same set, for scale.
    pub rhs_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualTable {
    pub rows: Vec<ResidualRow>,
    pub snapshots: usize,
}

impl ResidualTable {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.max_residual).fold(0.0, f64::max)
    }
}

/// Residuals of the curvature evolution equations along a trajectory.
///
/// The time derivative at fixed grid coordinate is the derivative of the
/// Lagrange interpolant through five consecutive snapshots (three if fewer
/// exist). In the proportional gauge every curvature quantity also moves with
/// the tangential field, which is removed as `v f_s` at the centre snapshot.
///
/// Only nodes with grid coordinate in `[cut, 1 - cut] * pi/2` count: next to
/// the endpoints the equations carry `1/s` factors that amplify rounding.
pub fn evolution_residuals(traj: &FlowTrajectory, eqs: &[CurvatureEquation], cut: f64) -> Result<ResidualTable> {
    if !(0.0..0.5).contains(&cut) {
        return Err(config(format!("interior cut {cut} must lie in [0, 0.5)")));
    }
    let k = traj.states.len();
    if k < 3 {
        return Err(config(format!("{k} snapshots are too few for centered differences")));
    }
    if eqs.is_empty() {
        return Err(config("no equations selected"));
    }
    if traj.states.windows(2).any(|w| !(w[0].time < w[1].time)) {
        return Err(config("snapshots must be strictly increasing in time"));
    }
    let width = if k >= 5 { 5 } else { 3 };
    let fields: Vec<Vec<Vec<f64>>> = traj
        .states
        .iter()
        .map(|st| eqs.iter().map(|&e| curvature_array(&st.profile, e)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut rows: Vec<ResidualRow> =
        eqs.iter().map(|&e| ResidualRow { equation: e, max_residual: 0.0, rhs_scale: 0.0 }).collect();
    for start in 0..=k - width {
        let times: Vec<f64> = traj.states[start..start + width].iter().map(|s| s.time).collect();
        let c = width / 2;
        let w = derivative_weights(&times, c);
        let centre = &traj.states[start + c];
        let snaps: Vec<&Vec<Vec<f64>>> = fields[start..start + width].iter().collect();
        residuals_at(centre, &w, &snaps, traj.gauge, cut, &mut rows)?;
    }
    Ok(ResidualTable { rows, snapshots: k })
}

/// Weights of the derivative at `x[c]` of the interpolant through `x`.
fn derivative_weights(x: &[f64], c: usize) -> Vec<f64> {
    let m = x.len();
    let mut w = vec![0.0; m];
    for j in 0..m {
        if j == c {
            w[j] = (0..m).filter(|&k| k != c).map(|k| 1.0 / (x[c] - x[k])).sum();
        } else {
            let mut prod = 1.0 / (x[j] - x[c]);
            for k in (0..m).filter(|&k| k != j && k != c) {
                prod *= (x[c] - x[k]) / (x[j] - x[k]);
            }
            w[j] = prod;
        }
    }
    w
}

fn residuals_at(
    centre: &FlowState,
    weights: &[f64],
    snaps: &[&Vec<Vec<f64>>],
    gauge: Gauge,
    cut: f64,
    rows: &mut [ResidualRow],
) -> Result<()> {
    let p = &centre.profile;
    let g = p.grid();
    let rhs = curvature_evolution_rhs(p)?;
    let field = match gauge {
        Gauge::Coordinate => None,
        Gauge::ProportionalArcLength => Some(gauge_field(p)?),
    };
    let m = p.chi().len();
    let c = weights.len() / 2;
    for (q, row) in rows.iter_mut().enumerate() {
        let eq = row.equation;
        let fc = &snaps[c][q];
        let r = match eq {
            CurvatureEquation::KTop => &rhs.k_top,
            CurvatureEquation::K1 => &rhs.k1_perp,
            CurvatureEquation::K2 => &rhs.k2_perp,
            CurvatureEquation::L => &rhs.l_sec,
            CurvatureEquation::KTopGradient => &rhs.k_top_s,
            CurvatureEquation::K1Gradient => &rhs.k1_perp_s,
        };
        let mut drift = vec![0.0; m];
        if let Some(f) = &field {
            let mut fr = vec![0.0; m];
            g.first(fc, eq.parity(), &mut fr);
            for i in 0..m {
                drift[i] = f.v[i] * fr[i] / p.chi()[i];
            }
        }
        for i in 1..m - 1 {
            let r_i = g.nodes()[i] / FRAC_PI_2;
            if r_i < cut || r_i > 1.0 - cut {
                continue;
            }
            let dt: f64 = weights.iter().zip(snaps).map(|(w, f)| w * f[q][i]).sum();
            row.max_residual = row.max_residual.max(abs(dt - drift[i] - r[i]));
            row.rhs_scale = row.rhs_scale.max(abs(r[i]));
        }
    }
    Ok(())
}

/// Default interior cut for residual audits.
pub const RESIDUAL_CUT: f64 = 0.05;

/// Snapshot spacing of the residual ladders, in simulation time.
pub const RESIDUAL_SNAPSHOT_DT: f64 = 0.01;

/// Hypersausage trajectories on a ladder of grids, with snapshots every
/// [`RESIDUAL_SNAPSHOT_DT`], and the residual table of each.
pub fn hypersausage_residual_ladder(
    nodes: &[usize],
    eqs: &[CurvatureEquation],
    cut: f64,
) -> Result<Vec<(usize, ResidualTable)>> {
    let mut out = Vec::new();
    for &m in nodes {
        let grid = Arc::new(Grid::new(m, Mesh::Uniform, SchemeOrder::Fourth)?);
        let p = hypersausage_exact(-2.0, &grid)?;
        let dt = adaptive_dt(&p, RunConfig::default().cfl)?;
        let cfg = RunConfig {
            t_end: Some(0.1),
            monitor_every: libm::round(RESIDUAL_SNAPSHOT_DT / dt).max(1.0) as u64,
            snapshot_every: 1,
            enforce_monitors: false,
            ..RunConfig::default()
        };
        let traj = run(p, cfg)?;
        out.push((m, evolution_residuals(&traj, eqs, cut)?));
    }
    Ok(out)
}

/// Observed convergence orders of the largest residual along a ladder.
pub fn residual_orders(ladder: &[(usize, ResidualTable)]) -> Vec<f64> {
    let nodes: Vec<usize> = ladder.iter().map(|l| l.0).collect();
    let errs: Vec<f64> = ladder.iter().map(|l| l.1.max_residual()).collect();
    observed_orders(&nodes, &errs)
}

/// One pass/fail audit line.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditCheck {
    pub name: String,
    /// The inequality, in plain notation.
    pub statement: String,
    /// Where in paper time it applies.
    pub window: String,
    pub passed: bool,
    /// Smallest normalized slack; negative means violated.
    pub worst_margin: f64,
    /// Paper time of the worst sample.
    pub at_time: f64,
    pub samples: usize,
}

/// A logged quantity without a pass/fail gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Trend {
    pub name: String,
    pub statement: String,
    /// `(label, value)` pairs, e.g. `("tau=-10", 1.03)`.
    pub values: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub subject: String,
    pub checks: Vec<AuditCheck>,
    pub trends: Vec<Trend>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Gate {
    name: &'static str,
    statement: String,
    window: String,
    worst: f64,
    at: f64,
    samples: usize,
}

impl Gate {
    fn new(name: &'static str, statement: String, window: &str) -> Gate {
        Gate { name, statement, window: window.to_string(), worst: f64::INFINITY, at: f64::NAN, samples: 0 }
    }

    fn sample(&mut self, t: f64, margin: f64) {
        self.samples += 1;
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
            self.at = t;
        }
    }

    fn finish(self) -> AuditCheck {
        let passed = self.worst >= 0.0;
        AuditCheck {
            name: self.name.to_string(),
            statement: self.statement,
            window: self.window,
            passed,
            worst_margin: if self.samples == 0 { f64::NAN } else { self.worst },
            at_time: self.at,
            samples: self.samples,
        }
    }
}

/// Relative slack used by the area, length and extinction-time gates.
pub const BOUND_SLACK: f64 = 0.01;
/// Absolute slack of the `h` and `d` lower bounds.
pub const ABS_SLACK: f64 = 1e-3;
/// Absolute slack of `h <= 1`.
pub const H_UPPER_SLACK: f64 = 1e-6;

/// Checks the a-priori bounds of an old-but-not-ancient run started at `tau`.
pub fn bounds_audit(traj: &FlowTrajectory, tau: f64) -> Result<AuditReport> {
    let ext = traj.extinction_time.ok_or_else(|| config("bounds audit needs a trajectory that reached extinction"))?;
    let n = traj.dimension as f64;
    let nm1 = n - 1.0;
    let s = BOUND_SLACK;

    let mut bracket = Gate::new("extinction_bracket", format!("-tau/(n-1) <= T <= -tau, T = extinction time"), "run");
    bracket.sample(0.0, (ext / (-tau / nm1) - (1.0 - s)).min((1.0 + s) - ext / -tau));

    let mut area = Gate::new("area", "-8 pi t <= A <= -8 pi (n-1) t".to_string(), "t < 0");
    let mut h_up = Gate::new("h_upper", "h <= 1".to_string(), "t < 0");
    let mut h_lo = Gate::new("h_lower", "h >= 1 - (n-1)/(-t)".to_string(), "t < -(n-1)");
    let mut l_lo = Gate::new("ell_lower", "ell >= -2 t".to_string(), "t < 0");
    let mut l_up = Gate::new("ell_upper", "ell <= -4(n-1) t / (1 - (n-1)/(-t))".to_string(), "t < -(n-1)");
    let mut d_lo = Gate::new("d_lower", "d >= log(-t / (2(n-1))) / (4(n-1))".to_string(), "t <= -2(n-1)");
    let mut myers = Gate::new("waist_curvature", "K_top(0) <= pi^2 / (4 ell^2)".to_string(), "t < 0");
    let mut sc_trend = Vec::new();

    for sm in &traj.summaries {
        let t = paper_time(sm.time, ext);
        if !(t < 0.0) {
            continue;
        }
        let lower = -8.0 * PI * t;
        area.sample(t, (sm.area / lower - (1.0 - s)).min((1.0 + s) - sm.area / (nm1 * lower)));
        h_up.sample(t, 1.0 + H_UPPER_SLACK - sm.h);
        l_lo.sample(t, sm.ell / (-2.0 * t) - (1.0 - s));
        myers.sample(t, (1.0 + s) - sm.k_top_waist * 4.0 * sm.ell * sm.ell / (PI * PI));
        if t < -nm1 {
            let q = 1.0 - nm1 / -t;
            h_lo.sample(t, sm.h - (q - ABS_SLACK));
            l_up.sample(t, (1.0 + s) - sm.ell * q / (-4.0 * nm1 * t));
        }
        if t <= -2.0 * nm1 {
            d_lo.sample(t, sm.d - (ln(-t / (2.0 * nm1)) / (4.0 * nm1) - ABS_SLACK));
            sc_trend.push((format!("t={t:.4}"), sm.sc_max * t * t));
        }
    }
    let checks = vec![
        bracket.finish(),
        area.finish(),
        h_up.finish(),
        h_lo.finish(),
        l_lo.finish(),
        l_up.finish(),
        d_lo.finish(),
        myers.finish(),
    ];
    let trends = vec![Trend {
        name: "scalar_curvature_decay".to_string(),
        statement: "Sc_max t^2 for t <= -2(n-1); bounded by C exp(-C t) once -t < T/10".to_string(),
        values: sc_trend,
    }];
    Ok(AuditReport { subject: format!("n={} tau={tau}", traj.dimension), checks, trends })
}

/// One member of a `tau` sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepMember<'a> {
    pub tau: f64,
    pub trajectory: &'a FlowTrajectory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticConfig {
    /// Simulation-time offsets from the start at which members are compared.
    pub offsets: Vec<f64>,
    /// Early-time window (simulation time) for the girth check.
    pub early_window: f64,
    pub girth_tol: f64,
    pub lambda_floor: f64,
}

impl Default for AsymptoticConfig {
    fn default() -> AsymptoticConfig {
        AsymptoticConfig { offsets: vec![0.0, 0.1, 0.25], early_window: 1.0, girth_tol: 0.05, lambda_floor: 0.9 }
    }
}

/// A summary field at simulation time `offset`, linear between samples.
fn field_at(traj: &FlowTrajectory, offset: f64, f: impl Fn(&GeoSummary) -> f64) -> Option<f64> {
    let ss = &traj.summaries;
    let k = ss.iter().position(|s| s.time >= offset - 1e-12)?;
    if k == 0 || ss[k].time <= offset {
        return Some(f(&ss[k]));
    }
    let (a, b) = (&ss[k - 1], &ss[k]);
    let w = (offset - a.time) / (b.time - a.time);
    Some((1.0 - w) * f(a) + w * f(b))
}

/// Monotone trends across a sweep as `-tau` grows, at matched early offsets.
pub fn asymptotic_audit(members: &[SweepMember<'_>], cfg: &AsymptoticConfig) -> Result<AuditReport> {
    let mut ms: Vec<SweepMember<'_>> = members.to_vec();
    ms.sort_by(|a, b| b.tau.partial_cmp(&a.tau).unwrap_or(core::cmp::Ordering::Equal));
    ms.dedup_by(|a, b| a.tau == b.tau);
    if ms.len() < 3 {
        return Err(config(format!("a sweep needs at least three distinct tau values, got {}", ms.len())));
    }
    let (near, far) = (-ms[0].tau, -ms[ms.len() - 1].tau);
    if !(near > 0.0) || far / near < 2.0 {
        return Err(config(format!("sweep range -tau in [{near}, {far}] spans less than a factor 2")));
    }
    let n = ms[0].trajectory.dimension;
    if ms.iter().any(|m| m.trajectory.dimension != n) {
        return Err(config("sweep members have different dimensions"));
    }
    if cfg.offsets.is_empty() {
        return Err(config("no comparison offsets"));
    }

    let mut lambda_inc =
        Gate::new("lambda_increasing", "lambda_hat increases with -tau".to_string(), "matched offsets");
    let mut lambda_floor =
        Gate::new("lambda_floor", format!("lambda_hat >= {} at the largest -tau", cfg.lambda_floor), "matched offsets");
    let mut cyl =
        Gate::new("cylinder_gap_decreasing", "cylinder_gap decreases with -tau".to_string(), "matched offsets");
    let mut cig = Gate::new("cigar_gap_decreasing", "cigar_gap decreases with -tau".to_string(), "matched offsets");
    let mut girth = Gate::new(
        "girth_near_2pi",
        format!("|girth_est / (2 pi) - 1| <= {} at the largest -tau", cfg.girth_tol),
        "early window",
    );
    let mut lambda_values = Vec::new();
    let mut ell_ratio = Vec::new();
    let mut area_ratio = Vec::new();

    for &off in &cfg.offsets {
        let sample = |f: fn(&GeoSummary) -> f64| -> Option<Vec<f64>> {
            ms.iter().map(|m| field_at(m.trajectory, off, f)).collect()
        };
        let (Some(lam), Some(cy), Some(ci)) =
            (sample(|s| s.lambda_hat), sample(|s| s.cylinder_gap), sample(|s| s.cigar_gap))
        else {
            lambda_inc.sample(off, f64::NAN);
            continue;
        };
        for k in 1..lam.len() {
            lambda_inc.sample(off, lam[k] - lam[k - 1]);
            cyl.sample(off, cy[k - 1] - cy[k]);
            cig.sample(off, ci[k - 1] - ci[k]);
        }
        lambda_floor.sample(off, lam[lam.len() - 1] - cfg.lambda_floor);
        for (m, l) in ms.iter().zip(&lam) {
            lambda_values.push((format!("tau={} offset={off}", m.tau), *l));
        }
    }
    let far_member = ms[ms.len() - 1].trajectory;
    for sm in far_member.summaries.iter().filter(|s| s.time <= cfg.early_window) {
        girth.sample(sm.time, cfg.girth_tol - abs(sm.girth_est / (2.0 * PI) - 1.0));
    }
    for m in &ms {
        if let (Some(ext), Some(first)) = (m.trajectory.extinction_time, m.trajectory.summaries.first()) {
            let t = paper_time(first.time, ext);
            ell_ratio.push((format!("tau={}", m.tau), first.ell / (-2.0 * t)));
            area_ratio.push((format!("tau={}", m.tau), first.area / (-8.0 * PI * t)));
        }
    }
    let checks = vec![lambda_inc.finish(), lambda_floor.finish(), cyl.finish(), cig.finish(), girth.finish()];
    let trends = vec![
        Trend {
            name: "lambda_hat".to_string(),
            statement: "tends to 1 from below as -tau grows".to_string(),
            values: lambda_values,
        },
        Trend {
            name: "ell_over_minus_2t".to_string(),
            statement: "ell / (-2t) at the first sample, limit in [1, 4(n-1)]".to_string(),
            values: ell_ratio,
        },
        Trend {
            name: "area_over_minus_8pi_t".to_string(),
            statement: "A / (-8 pi t) at the first sample, limit at most 1 + eps".to_string(),
            values: area_ratio,
        },
    ];
    Ok(AuditReport { subject: format!("sweep n={n} over {} values of tau", ms.len()), checks, trends })
}

/// Nodewise monotonicity of `psi` along snapshots in the coordinate gauge.
pub fn psi_nonincreasing(traj: &FlowTrajectory, rel_tol: f64) -> Result<f64> {
    if traj.gauge != Gauge::Coordinate {
        return Err(config("monotonicity in t at fixed point needs the coordinate gauge"));
    }
    let mut worst = 0.0f64;
    for w in traj.states.windows(2) {
        let (a, b) = (w[0].profile.psi(), w[1].profile.psi());
        for i in 0..a.len() {
            let scale = a[i].max(f64::MIN_POSITIVE);
            worst = worst.max((b[i] - a[i]) / scale);
        }
    }
    if worst > rel_tol {
        return Err(Error::Data(format!("psi increased by a relative {worst:e}")));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{sausage_slice_in, Chart};

    #[test]
    fn paper_time_shift() {
        assert_eq!(paper_time(1.0, 4.0), -3.0);
    }

    #[test]
    fn five_point_weights_are_exact_on_quartics() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = derivative_weights(&x, 2);
        let d: f64 = w.iter().zip(&x).map(|(w, x)| w * x * x * x * x).sum();
        assert!((d - 4.0 * 0.25f64.powi(3)).abs() < 1e-12);
        assert!(w.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn orders_from_a_clean_ladder() {
        let o = observed_orders(&[101, 201, 401], &[1.6e-3, 1e-4, 6.25e-6]);
        assert!(o.iter().all(|x| (x - 4.0).abs() < 1e-12));
    }

    #[test]
    fn sweep_preconditions() {
        let g = Arc::new(Grid::new(41, Mesh::Uniform, SchemeOrder::Second).unwrap());
        let p = sausage_slice_in(-2.0, 3, &g, Chart::ArcLength).unwrap();
        let cfg = RunConfig { t_end: Some(1e-3), ..RunConfig::default() };
        let tr = run(p, cfg).unwrap();
        let two = [SweepMember { tau: -5.0, trajectory: &tr }, SweepMember { tau: -10.0, trajectory: &tr }];
        assert!(matches!(asymptotic_audit(&two, &AsymptoticConfig::default()), Err(Error::Config(_))));
        let narrow = [
            SweepMember { tau: -5.0, trajectory: &tr },
            SweepMember { tau: -6.0, trajectory: &tr },
            SweepMember { tau: -7.0, trajectory: &tr },
        ];
        assert!(matches!(asymptotic_audit(&narrow, &AsymptoticConfig::default()), Err(Error::Config(_))));
        assert!(matches!(bounds_audit(&tr, -2.0), Err(Error::Config(_))));
    }

    #[test]
    fn round_sphere_residuals_vanish_to_rounding() {
        let g = Arc::new(Grid::new(401, Mesh::Uniform, SchemeOrder::Fourth).unwrap());
        let p = round_sphere(1.0, &g, 3).unwrap();
        let cfg = RunConfig { t_end: Some(0.01), monitor_every: 200, snapshot_every: 1, ..RunConfig::default() };
        let traj = run(p, cfg).unwrap();
        let table = evolution_residuals(&traj, &CurvatureEquation::ALL, 0.0).unwrap();
        let ds = crate::math::FRAC_PI_2 / 400.0 * sqrt(1.0 - 0.04);
        let floor = 64.0 * f64::EPSILON / (ds * ds * ds * ds);
        for row in &table.rows[..4] {
            assert!(row.max_residual < floor, "{:?} {floor:e}", row);
        }
        for row in &table.rows[4..] {
            assert!(row.max_residual < floor / ds, "{:?}", row);
        }
    }
}
