//! The job configuration file.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    = blank | comment | entry
//! comment = "#" anything
//! entry   = key "=" value [ "#" anything ]
//! key     = [a-z_][a-z0-9_]*
//! value   = text up to the comment; lists are comma separated
//! ```
//!
//! Keys may appear once. Unknown keys are errors, so typos never pass silently.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `initial` | `sausage`, `round_sphere` or `hypersausage` | `sausage` |
//! | `n` | dimension of the sphere, at least 3 | `3` |
//! | `tau` | sausage parameter, negative | required for `run` with `sausage` |
//! | `taus` | comma separated sausage parameters for `sweep` | |
//! | `rho` | round sphere radius | `1` |
//! | `t0` | hypersausage start time, negative | `-2` |
//! | `chart` | `auto`, `angle` or `arc_length` | `auto` |
//! | `nodes` | grid nodes | `401` |
//! | `order` | `2` or `4` | `4` |
//! | `mesh` | `uniform` or `stretched` | `uniform` |
//! | `mesh_strength` | stretching in `[0, 1)` | `0.5` |
//! | `cfl` | step safety factor in `(0, 1]` | `0.9` |
//! | `stepper` | `explicit` or `imex` | `explicit` |
//! | `gauge` | `coordinate` or `proportional` | `proportional` |
//! | `imex_eta` | IMEX relative change per step | `1e-3` |
//! | `t_end` | stop time; omit to run to extinction | |
//! | `monitor_every` | steps between summary rows | `100` |
//! | `snapshot_every` | summary rows between profile snapshots | `10` |
//! | `checkpoint_every` | steps between checkpoints, `0` for none | `0` |
//! | `profile_points` | points kept in each profile snapshot | `201` |
//! | `curvature_cap`, `area_floor` | extinction detection | `1e6`, `1e-3` |
//! | `max_steps` | step budget | `50000000` |
//! | `enforce_monitors` | stop on a curvature condition breach | `true` |
//! | `monitor_tol`, `smoothness_tol` | monitor tolerances | `1e-6`, `1e-3` |
//! | `gap_window` | arc length window of the asymptotic gaps | `5` |
//! | `audit_offsets` | sweep comparison offsets in simulation time | `0, 0.1, 0.25` |
//! | `out` | output directory | `warpflow_out` |
//! | `plots` | write SVG plots | `true` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use warpflow_core::initial_data::{hypersausage_exact, round_sphere, sausage_slice_in, Chart};
use warpflow_core::verify::AsymptoticConfig;
use warpflow_core::{Gauge, Grid, Mesh, Profile, RunConfig, SchemeOrder};

use crate::error::{Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Initial {
    Sausage,
    RoundSphere { rho: f64 },
    Hypersausage { t0: f64 },
}

impl Initial {
    pub fn name(self) -> &'static str {
        match self {
            Initial::Sausage => "sausage",
            Initial::RoundSphere { .. } => "round_sphere",
            Initial::Hypersausage { .. } => "hypersausage",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    pub initial: Initial,
    pub n: usize,
    pub tau: Option<f64>,
    pub taus: Vec<f64>,
    /// `None` picks the chart from `tau`.
    pub chart: Option<Chart>,
    pub nodes: usize,
    pub order: SchemeOrder,
    pub mesh: Mesh,
    pub run: RunConfig,
    pub checkpoint_every: u64,
    pub profile_points: usize,
    pub audit: AsymptoticConfig,
    pub out: PathBuf,
    pub plots: bool,
    /// The text this was parsed from, stored in checkpoints.
    pub source: String,
}

const KEYS: &[&str] = &[
    "initial",
    "n",
    "tau",
    "taus",
    "rho",
    "t0",
    "chart",
    "nodes",
    "order",
    "mesh",
    "mesh_strength",
    "cfl",
    "stepper",
    "gauge",
    "imex_eta",
    "t_end",
    "monitor_every",
    "snapshot_every",
    "checkpoint_every",
    "profile_points",
    "curvature_cap",
    "area_floor",
    "max_steps",
    "enforce_monitors",
    "monitor_tol",
    "smoothness_tol",
    "gap_window",
    "audit_offsets",
    "out",
    "plots",
];

fn bad(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

/// Splits the text into a key map, rejecting malformed lines and duplicates.
fn entries(text: &str) -> Outcome<BTreeMap<String, (usize, String)>> {
    let mut map = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| bad(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let well_formed = key.chars().next().is_some_and(|c| c.is_ascii_lowercase() || c == '_')
            && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !well_formed {
            return Err(bad(format!("line {lineno}: malformed key `{key}`")));
        }
        if !KEYS.contains(&key) {
            return Err(bad(format!("line {lineno}: unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(bad(format!("line {lineno}: `{key}` has no value")));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (lineno, value.to_string())) {
            return Err(bad(format!("line {lineno}: `{key}` already set on line {first}")));
        }
    }
    Ok(map)
}

struct Reader {
    map: BTreeMap<String, (usize, String)>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Outcome<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((l, v)) => {
                v.parse().map(Some).map_err(|_| bad(format!("line {l}: `{key}` must be {what}, got `{v}`")))
            }
        }
    }

    fn float(&self, key: &str) -> Outcome<Option<f64>> {
        let v: Option<f64> = self.parse(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(bad(format!("`{key}` must be finite, got {x}"))),
            _ => Ok(v),
        }
    }

    fn int(&self, key: &str) -> Outcome<Option<u64>> {
        self.parse(key, "a non-negative integer")
    }

    fn flag(&self, key: &str) -> Outcome<Option<bool>> {
        self.parse(key, "`true` or `false`")
    }

    fn floats(&self, key: &str) -> Outcome<Option<Vec<f64>>> {
        let Some((l, v)) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("line {l}: `{key}` entry `{s}` is not a finite number")))
            })
            .collect::<Outcome<Vec<f64>>>()
            .map(Some)
    }

    fn word<'a>(&'a self, key: &str, allowed: &[&str]) -> Outcome<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, v)) if allowed.contains(&v) => Ok(Some(v)),
            Some((l, v)) => Err(bad(format!("line {l}: `{key}` must be one of {}, got `{v}`", allowed.join(", ")))),
        }
    }
}

fn negative(key: &str, x: f64) -> Outcome<f64> {
    if x < 0.0 {
        Ok(x)
    } else {
        Err(bad(format!("`{key}` must be negative, got {x}")))
    }
}

impl JobConfig {
    pub fn parse(text: &str) -> Outcome<JobConfig> {
        let r = Reader { map: entries(text)? };

        let n = r.int("n")?.unwrap_or(3) as usize;
        if n < 3 {
            return Err(bad(format!("`n` must be at least 3, got {n}")));
        }
        let initial = match r.word("initial", &["sausage", "round_sphere", "hypersausage"])?.unwrap_or("sausage") {
            "round_sphere" => {
                let rho = r.float("rho")?.unwrap_or(1.0);
                if !(rho > 0.0) {
                    return Err(bad(format!("`rho` must be positive, got {rho}")));
                }
                Initial::RoundSphere { rho }
            }
            "hypersausage" => {
                if n != 3 {
                    return Err(bad(format!("the hypersausage lives on S^3, got n = {n}")));
                }
                Initial::Hypersausage { t0: negative("t0", r.float("t0")?.unwrap_or(-2.0))? }
            }
            _ => Initial::Sausage,
        };
        for (key, kind) in [("rho", "round_sphere"), ("t0", "hypersausage")] {
            if r.raw(key).is_some() && initial.name() != kind {
                return Err(bad(format!("`{key}` only applies to initial = {kind}")));
            }
        }
        let tau = r.float("tau")?.map(|t| negative("tau", t)).transpose()?;
        let taus = r.floats("taus")?.unwrap_or_default();
        for &t in &taus {
            negative("taus", t)?;
        }
        if initial != Initial::Sausage && (tau.is_some() || !taus.is_empty()) {
            return Err(bad("`tau` and `taus` only apply to initial = sausage"));
        }
        let chart = match r.word("chart", &["auto", "angle", "arc_length"])? {
            None | Some("auto") => None,
            Some(c) => Chart::parse(c),
        };

        let nodes = r.int("nodes")?.unwrap_or(401) as usize;
        if nodes < 11 {
            return Err(bad(format!("`nodes` must be at least 11, got {nodes}")));
        }
        let order = SchemeOrder::from_u32(r.int("order")?.unwrap_or(4) as u32)?;
        let strength = r.float("mesh_strength")?;
        let mesh = match r.word("mesh", &["uniform", "stretched"])?.unwrap_or("uniform") {
            "stretched" => {
                let strength = strength.unwrap_or(0.5);
                if !(0.0..1.0).contains(&strength) {
                    return Err(bad(format!("`mesh_strength` must lie in [0, 1), got {strength}")));
                }
                Mesh::Stretched { strength }
            }
            _ => {
                if strength.is_some() {
                    return Err(bad("`mesh_strength` only applies to mesh = stretched"));
                }
                Mesh::Uniform
            }
        };

        let base = RunConfig::default();
        let run = RunConfig {
            cfl: r.float("cfl")?.unwrap_or(base.cfl),
            t_end: r.float("t_end")?,
            monitor_every: r.int("monitor_every")?.unwrap_or(base.monitor_every),
            snapshot_every: r.int("snapshot_every")?.unwrap_or(base.snapshot_every),
            gauge: match r.word("gauge", &["coordinate", "proportional"])? {
                Some(g) => Gauge::parse(g).unwrap_or(Gauge::ProportionalArcLength),
                None => Gauge::ProportionalArcLength,
            },
            imex: r.word("stepper", &["explicit", "imex"])? == Some("imex"),
            imex_eta: r.float("imex_eta")?.unwrap_or(base.imex_eta),
            curvature_cap: r.float("curvature_cap")?.unwrap_or(base.curvature_cap),
            area_floor: r.float("area_floor")?.unwrap_or(base.area_floor),
            max_steps: r.int("max_steps")?.unwrap_or(base.max_steps),
            enforce_monitors: r.flag("enforce_monitors")?.unwrap_or(base.enforce_monitors),
            monitor_tol: r.float("monitor_tol")?.unwrap_or(base.monitor_tol),
            smoothness_tol: r.float("smoothness_tol")?.unwrap_or(base.smoothness_tol),
            gap_window: r.float("gap_window")?.unwrap_or(base.gap_window),
            ..base
        };
        run.validate()?;

        let profile_points = r.int("profile_points")?.unwrap_or(201) as usize;
        if profile_points < 2 {
            return Err(bad(format!("`profile_points` must be at least 2, got {profile_points}")));
        }
        let mut audit = AsymptoticConfig::default();
        if let Some(offsets) = r.floats("audit_offsets")? {
            if offsets.is_empty() || offsets.iter().any(|&o| o < 0.0) {
                return Err(bad("`audit_offsets` must be non-negative"));
            }
            audit.offsets = offsets;
        }

        Ok(JobConfig {
            initial,
            n,
            tau,
            taus,
            chart,
            nodes,
            order,
            mesh,
            run,
            checkpoint_every: r.int("checkpoint_every")?.unwrap_or(0),
            profile_points,
            audit,
            out: PathBuf::from(r.raw("out").map_or("warpflow_out", |(_, v)| v)),
            plots: r.flag("plots")?.unwrap_or(true),
            source: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Outcome<JobConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        JobConfig::parse(&text)
    }

    /// Checks what a single run needs beyond the grammar.
    pub fn check_run(&self) -> Outcome<()> {
        if self.initial == Initial::Sausage && self.tau.is_none() {
            return Err(bad("initial = sausage needs `tau`"));
        }
        if !self.taus.is_empty() {
            return Err(bad("`taus` is for sweeps; use `tau` for a single run"));
        }
        Ok(())
    }

    /// Checks what a sweep needs: at least three distinct `tau` spanning a factor 2.
    pub fn check_sweep(&self) -> Outcome<()> {
        if self.initial != Initial::Sausage {
            return Err(bad("sweeps run from sausage data"));
        }
        if self.tau.is_some() {
            return Err(bad("a sweep takes `taus`, not `tau`"));
        }
        let mut ts = self.taus.clone();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        if ts.len() < 3 {
            return Err(bad(format!("a sweep needs at least three distinct values in `taus`, got {}", ts.len())));
        }
        let (far, near) = (-ts[0], -ts[ts.len() - 1]);
        if far / near < 2.0 {
            return Err(bad(format!("`taus` must span a factor 2 in -tau, got [{near}, {far}]")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Outcome<Arc<Grid>> {
        Ok(Arc::new(Grid::new(self.nodes, self.mesh, self.order)?))
    }

    /// The initial profile; `tau` overrides the configured one (sweep members).
    pub fn initial_profile(&self, tau: Option<f64>) -> Outcome<Profile> {
        let g = self.grid()?;
        let p = match self.initial {
            Initial::Sausage => {
                let tau = tau.or(self.tau).ok_or_else(|| bad("initial = sausage needs `tau`"))?;
                sausage_slice_in(tau, self.n, &g, self.chart.unwrap_or(Chart::for_tau(tau)))?
            }
            Initial::RoundSphere { rho } => round_sphere(rho, &g, self.n)?,
            Initial::Hypersausage { t0 } => hypersausage_exact(t0, &g)?,
        };
        Ok(p)
    }

    /// Extinction time known in closed form, used for paper time when a run stops early.
    pub fn exact_extinction(&self) -> Option<f64> {
        match self.initial {
            Initial::Sausage => None,
            Initial::RoundSphere { rho } => Some(rho * rho / (2.0 * (self.n - 1) as f64)),
            Initial::Hypersausage { t0 } => Some(-t0),
        }
    }

    /// Generator name and parameters for provenance records.
    pub fn generator(&self, tau: Option<f64>) -> (String, BTreeMap<String, String>) {
        let mut params = BTreeMap::new();
        params.insert("n".to_string(), self.n.to_string());
        params.insert("nodes".to_string(), self.nodes.to_string());
        match self.initial {
            Initial::Sausage => {
                let tau = tau.or(self.tau).unwrap_or(f64::NAN);
                params.insert("tau".to_string(), tau.to_string());
                params.insert("chart".to_string(), self.chart.unwrap_or(Chart::for_tau(tau)).name().to_string());
            }
            Initial::RoundSphere { rho } => {
                params.insert("rho".to_string(), rho.to_string());
            }
            Initial::Hypersausage { t0 } => {
                params.insert("t0".to_string(), t0.to_string());
            }
        }
        (self.initial.name().to_string(), params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = JobConfig::parse("tau = -1\n").unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.nodes, 401);
        assert_eq!(c.order, SchemeOrder::Fourth);
        assert_eq!(c.run.gauge, Gauge::ProportionalArcLength);
        assert!(!c.run.imex);
        assert_eq!(c.run.t_end, None);
        c.check_run().unwrap();
    }

    #[test]
    fn comments_and_lists() {
        let c = JobConfig::parse("# sweep\ntaus = -5, -10,-20  # three\nstepper = imex\n").unwrap();
        assert_eq!(c.taus, vec![-5.0, -10.0, -20.0]);
        assert!(c.run.imex);
        c.check_sweep().unwrap();
    }

    #[test]
    fn rejections() {
        for text in [
            "tau = 1",
            "tau = -1\ntau = -2",
            "tua = -1",
            "tau -1",
            "tau = -1\nnodes = many",
            "tau = -1\norder = 3",
            "tau = -1\nmesh_strength = 0.2",
            "initial = hypersausage\nn = 4",
            "initial = round_sphere\ntau = -1",
            "tau = -1\ncfl = 2",
            "tau = nan",
        ] {
            let e = JobConfig::parse(text).unwrap_err();
            assert!(matches!(e, Failure::Config(_)), "{text}: {e}");
        }
        assert!(JobConfig::parse("taus = -5, -10").unwrap().check_sweep().is_err());
        assert!(JobConfig::parse("taus = -5, -6, -7").unwrap().check_sweep().is_err());
        assert!(JobConfig::parse("n = 3").unwrap().check_run().is_err());
    }
}
