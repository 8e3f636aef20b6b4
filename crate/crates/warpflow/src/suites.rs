//! The `verify` suites at pinned desk-scale settings.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};
use warpflow_core::diagnostics::{arc_spacing, MONITOR_TOL};
use warpflow_core::evolve::run as evolve;
use warpflow_core::initial_data::{hypersausage_exact, round_sphere, sausage_slice_in, Chart};
use warpflow_core::metric::{
    curvature_derivative_identities, ricci_and_scalar, scalar_from_sectional, sectional_curvatures,
};
use warpflow_core::verify::{
    bounds_audit, evolution_residuals, hypersausage_residual_ladder, oracle_error, residual_orders, AuditCheck,
    AuditReport, CurvatureEquation, ErrorTable, OracleConfig, Trend, RESIDUAL_CUT,
};
use warpflow_core::{Gauge, Grid, Mesh, Profile, RunConfig, SchemeOrder, TerminationReason};

use crate::error::Outcome;
use crate::persistence::SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oracles,
    Residuals,
    Bounds,
    Identities,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Residuals => "residuals",
            Suite::Bounds => "bounds",
            Suite::Identities => "identities",
            Suite::All => "all",
        }
    }
}

/// Required observed convergence order.
pub const MIN_ORDER: f64 = 1.8;
/// Required relative error of the finest oracle grid.
pub const ORACLE_TOL: f64 = 1e-3;
/// Relative slack of the round-sphere extinction time.
pub const EXTINCTION_TOL: f64 = 0.01;

pub const BOUNDS_NODES: usize = 401;
pub const BOUNDS_MATRIX: [(usize, f64); 6] = [(3, -2.0), (3, -5.0), (3, -10.0), (4, -2.0), (4, -5.0), (4, -10.0)];

fn check(name: impl Into<String>, statement: impl Into<String>, worst_margin: f64, samples: usize) -> AuditCheck {
    AuditCheck {
        name: name.into(),
        statement: statement.into(),
        window: "whole run".to_string(),
        passed: worst_margin >= 0.0,
        worst_margin,
        at_time: f64::NAN,
        samples,
    }
}

fn grid(m: usize) -> Outcome<Arc<Grid>> {
    Ok(Arc::new(Grid::new(m, Mesh::Uniform, SchemeOrder::Fourth)?))
}

/// Settings for runs to extinction: IMEX in the proportional gauge.
pub fn extinction_run_config() -> RunConfig {
    RunConfig { imex: true, gauge: Gauge::ProportionalArcLength, monitor_every: 20, ..RunConfig::default() }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<AuditCheck>,
    pub trends: Vec<Trend>,
    pub details: Value,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "suite": self.suite,
            "passed": self.passed(),
            "checks": self.checks.iter().map(check_json).collect::<Vec<_>>(),
            "trends": self.trends.iter().map(trend_json).collect::<Vec<_>>(),
            "details": self.details,
        })
    }
}

fn check_json(c: &AuditCheck) -> Value {
    json!({
        "name": c.name,
        "statement": c.statement,
        "window": c.window,
        "passed": c.passed,
        "worst_margin": c.worst_margin,
        "at_time": c.at_time,
        "samples": c.samples,
    })
}

fn trend_json(t: &Trend) -> Value {
    json!({
        "name": t.name,
        "statement": t.statement,
        "values": t.values.iter().map(|(k, v)| json!({"label": k, "value": v})).collect::<Vec<_>>(),
    })
}

pub fn audit_json(r: &AuditReport) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "subject": r.subject,
        "passed": r.passed(),
        "checks": r.checks.iter().map(check_json).collect::<Vec<_>>(),
        "trends": r.trends.iter().map(trend_json).collect::<Vec<_>>(),
    })
}

fn table_json(t: &ErrorTable) -> Value {
    json!({
        "oracle": t.oracle,
        "order": t.order.as_u32(),
        "rows": t.rows.iter().map(|r| json!({
            "nodes": r.nodes, "err_psi": r.err_psi, "err_phi": r.err_phi, "steps": r.steps,
        })).collect::<Vec<_>>(),
        "observed_orders": t.observed_orders,
    })
}

fn ladder_check(name: &str, t: &ErrorTable) -> AuditCheck {
    let err_margin = (ORACLE_TOL - t.finest_error()) / ORACLE_TOL;
    let order_margin = t.min_order() - MIN_ORDER;
    check(
        name,
        format!("finest relative error <= {ORACLE_TOL:e} and observed order >= {MIN_ORDER}"),
        err_margin.min(order_margin),
        t.rows.len(),
    )
}

/// Round sphere of radius 1 in dimension `n` run to extinction at `nodes`.
pub fn round_sphere_extinction(n: usize, nodes: usize) -> Outcome<(f64, f64)> {
    let p = round_sphere(1.0, &grid(nodes)?, n)?;
    let traj = evolve(p, extinction_run_config())?;
    let exact = 1.0 / (2.0 * (n - 1) as f64);
    Ok((traj.extinction_time.unwrap_or(f64::NAN), exact))
}

pub fn oracles() -> Outcome<SuiteReport> {
    let cfgs = [
        ("hypersausage_order4", OracleConfig::hypersausage()),
        ("hypersausage_order2", OracleConfig { order: SchemeOrder::Second, ..OracleConfig::hypersausage() }),
        ("round_sphere_n3", OracleConfig::round_sphere(3)),
        ("round_sphere_n4", OracleConfig::round_sphere(4)),
    ];
    let tables: Vec<Outcome<ErrorTable>> = cfgs.par_iter().map(|(_, c)| Ok(oracle_error(c)?)).collect();
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for ((name, _), t) in cfgs.iter().zip(tables) {
        let t = t?;
        if name.starts_with("hypersausage") {
            checks.push(ladder_check(name, &t));
        } else {
            // the sphere stays round, so the error sits at the rounding floor on every grid
            checks.push(check(*name, "finest relative error <= 1e-8", (1e-8 - t.finest_error()) / 1e-8, t.rows.len()));
        }
        details.push(table_json(&t));
    }
    let (t, exact) = round_sphere_extinction(3, 401)?;
    checks.push(check(
        "round_sphere_extinction",
        format!("extinction time within {EXTINCTION_TOL} of {exact} (n = 3, N = 401)"),
        EXTINCTION_TOL - (t / exact - 1.0).abs(),
        1,
    ));
    details.push(json!({"round_sphere_extinction": {"measured": t, "exact": exact}}));
    Ok(SuiteReport { suite: "oracles".to_string(), checks, trends: Vec::new(), details: Value::Array(details) })
}

pub fn residuals() -> Outcome<SuiteReport> {
    let mut checks = Vec::new();
    let ladder = hypersausage_residual_ladder(&[101, 201, 401], &CurvatureEquation::ALL, RESIDUAL_CUT)?;
    let orders = residual_orders(&ladder);
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(check(
        "hypersausage_residual_order",
        format!("largest curvature-equation residual converges at order >= {MIN_ORDER}"),
        worst - MIN_ORDER,
        ladder.len(),
    ));
    let ladder_json: Vec<Value> = ladder
        .iter()
        .map(|(m, t)| {
            json!({
                "nodes": m,
                "snapshots": t.snapshots,
                "rows": t.rows.iter().map(|r| json!({
                    "equation": r.equation.tag(), "max_residual": r.max_residual, "rhs_scale": r.rhs_scale,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();

    // round sphere: every residual is a pure rounding artifact
    let m = 401;
    let p = round_sphere(1.0, &grid(m)?, 3)?;
    let cfg = RunConfig { t_end: Some(0.01), monitor_every: 200, snapshot_every: 1, ..RunConfig::default() };
    let traj = evolve(p, cfg)?;
    let table = evolution_residuals(&traj, &CurvatureEquation::ALL, 0.0)?;
    let ds = traj
        .final_state()
        .map(|s| arc_spacing(&s.profile))
        .unwrap_or_default()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let floor = 64.0 * f64::EPSILON / ds.powi(4);
    let mut sphere_margin = f64::INFINITY;
    let mut sphere_rows = Vec::new();
    for (k, row) in table.rows.iter().enumerate() {
        let level = if k < 4 { floor } else { floor / ds };
        sphere_margin = sphere_margin.min(1.0 - row.max_residual / level);
        sphere_rows
            .push(json!({"equation": row.equation.tag(), "max_residual": row.max_residual, "rounding_level": level}));
    }
    checks.push(check(
        "round_sphere_rounding_level",
        "residuals below 64 eps/ds^4 (scalar) and 64 eps/ds^5 (gradient)",
        sphere_margin,
        table.rows.len(),
    ));
    Ok(SuiteReport {
        suite: "residuals".to_string(),
        checks,
        trends: Vec::new(),
        details: json!({"hypersausage": ladder_json, "orders": orders, "round_sphere": sphere_rows}),
    })
}

/// One run of the bounds matrix.
#[derive(Clone, Debug)]
pub struct BoundsRun {
    pub n: usize,
    pub tau: f64,
    pub reason: TerminationReason,
    pub diagnostic: Option<String>,
    pub extinction_time: Option<f64>,
    /// Smallest normalized margin of the four curvature orderings over all summaries.
    pub min_ordering: f64,
    /// Same for the four gradient conditions.
    pub min_gradient: f64,
    pub summaries: usize,
    pub audit: Option<AuditReport>,
    pub audit_error: Option<String>,
}

impl BoundsRun {
    pub fn label(&self) -> String {
        format!("n{}_tau{}", self.n, self.tau)
    }

    pub fn curvature_margin(&self) -> f64 {
        self.min_ordering.min(self.min_gradient) + MONITOR_TOL
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.audit.as_ref().and_then(|a| a.check(name))
    }
}

/// Runs sausage data for every `(n, tau)` to extinction at `nodes` and audits the bounds.
pub fn bounds_matrix(cases: &[(usize, f64)], nodes: usize) -> Outcome<Vec<BoundsRun>> {
    let g = grid(nodes)?;
    cases
        .par_iter()
        .map(|&(n, tau)| {
            let p = sausage_slice_in(tau, n, &g, Chart::for_tau(tau))?;
            let traj = evolve(p, extinction_run_config())?;
            let min_ordering = traj.summaries.iter().map(|s| s.min_ordering_margin()).fold(f64::INFINITY, f64::min);
            let min_gradient = traj.summaries.iter().map(|s| s.min_gradient_margin()).fold(f64::INFINITY, f64::min);
            let (audit, audit_error) = match bounds_audit(&traj, tau) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(BoundsRun {
                n,
                tau,
                reason: traj.termination_reason,
                diagnostic: traj.diagnostic.clone(),
                extinction_time: traj.extinction_time,
                min_ordering,
                min_gradient,
                summaries: traj.summaries.len(),
                audit,
                audit_error,
            })
        })
        .collect()
}

pub fn bounds() -> Outcome<SuiteReport> {
    let runs = bounds_matrix(&BOUNDS_MATRIX, BOUNDS_NODES)?;
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for r in &runs {
        let label = r.label();
        let done = r.reason == TerminationReason::Extinction;
        checks.push(check(format!("{label}/extinction"), "run reaches extinction", if done { 0.0 } else { -1.0 }, 1));
        checks.push(check(
            format!("{label}/curvature_conditions"),
            format!("ordering and gradient margins >= -{MONITOR_TOL:e} times the local curvature scale"),
            r.curvature_margin(),
            r.summaries,
        ));
        match &r.audit {
            Some(a) => {
                checks.extend(a.checks.iter().map(|c| AuditCheck { name: format!("{label}/{}", c.name), ..c.clone() }))
            }
            None => checks.push(check(format!("{label}/audit"), "bounds audit ran", -1.0, 0)),
        }
        details.push(json!({
            "n": r.n,
            "tau": r.tau,
            "reason": r.reason.tag(),
            "diagnostic": r.diagnostic,
            "extinction_time": r.extinction_time,
            "min_ordering_margin": r.min_ordering,
            "min_gradient_margin": r.min_gradient,
            "audit": r.audit.as_ref().map(audit_json),
            "audit_error": r.audit_error,
        }));
    }
    let trends = runs
        .iter()
        .filter_map(|r| r.audit.as_ref().map(|a| (r.label(), a)))
        .flat_map(|(label, a)| a.trends.iter().map(move |t| Trend { name: format!("{label}/{}", t.name), ..t.clone() }))
        .collect();
    Ok(SuiteReport { suite: "bounds".to_string(), checks, trends, details: Value::Array(details) })
}

fn trace_errors(p: &Profile) -> Outcome<(f64, f64)> {
    let n = p.dimension();
    let ric = ricci_and_scalar(p)?;
    let sec = sectional_curvatures(p)?;
    let from_sec = scalar_from_sectional(n, &sec);
    let scale = ric.scalar.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut trace: f64 = 0.0;
    let mut sectional: f64 = 0.0;
    for i in 0..ric.scalar.len() {
        let t = ric.rc11[i] + ric.rc22[i] + (n - 2) as f64 * ric.rc_ii[i];
        trace = trace.max((t - ric.scalar[i]).abs() / scale);
        sectional = sectional.max((from_sec[i] - ric.scalar[i]).abs() / scale);
    }
    Ok((trace, sectional))
}

pub fn identities() -> Outcome<SuiteReport> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut trace_worst: f64 = 0.0;
    let mut sec_worst: f64 = 0.0;
    let g = grid(401)?;
    for n in [3usize, 4, 5, 8] {
        for tau in [-1.0, -5.0] {
            let p = sausage_slice_in(tau, n, &g, Chart::for_tau(tau))?;
            let (t, s) = trace_errors(&p)?;
            trace_worst = trace_worst.max(t);
            sec_worst = sec_worst.max(s);
            rows.push(json!({"n": n, "tau": tau, "ricci_trace": t, "sectional_sum": s}));
        }
    }
    checks.push(check(
        "ricci_trace",
        "scalar curvature equals the Ricci trace to 1e-12",
        1.0 - trace_worst / 1e-12,
        rows.len(),
    ));
    checks.push(check(
        "sectional_sum",
        "scalar curvature equals twice the sum of sectional curvatures to 1e-9",
        1.0 - sec_worst / 1e-9,
        rows.len(),
    ));

    let nodes = [101usize, 201, 401];
    let mut errs = Vec::new();
    for &m in &nodes {
        let p = hypersausage_exact(-1.0, &grid(m)?)?;
        let c = sectional_curvatures(&p)?;
        errs.push(curvature_derivative_identities(&c, &p).max());
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(check(
        "derivative_identities_converge",
        format!("first-order curvature identities converge at order >= {MIN_ORDER} on the hypersausage"),
        worst - MIN_ORDER,
        nodes.len(),
    ));
    let sphere = round_sphere(1.5, &grid(401)?, 4)?;
    let sc = sectional_curvatures(&sphere)?;
    let sphere_res = curvature_derivative_identities(&sc, &sphere).max();
    checks.push(check(
        "derivative_identities_round_sphere",
        "identity residuals below 5e-8",
        1.0 - sphere_res / 5e-8,
        1,
    ));
    Ok(SuiteReport {
        suite: "identities".to_string(),
        checks,
        trends: Vec::new(),
        details: json!({
            "traces": rows,
            "hypersausage": {"nodes": nodes, "residuals": errs, "orders": orders},
            "round_sphere": sphere_res,
        }),
    })
}

/// Runs `suite`; `All` expands to the four suites in order.
pub fn run_suite(suite: Suite) -> Outcome<Vec<SuiteReport>> {
    match suite {
        Suite::Oracles => Ok(vec![oracles()?]),
        Suite::Residuals => Ok(vec![residuals()?]),
        Suite::Bounds => Ok(vec![bounds()?]),
        Suite::Identities => Ok(vec![identities()?]),
        Suite::All => Ok(vec![oracles()?, residuals()?, bounds()?, identities()?]),
    }
}
