//! Run outputs: `summary.csv`, `profiles/*.json`, `report.json`.
//!
//! `summary.csv` columns, one row per monitor step:
//!
//! | column | meaning |
//! |--------|---------|
//! | `time_sim` | simulation time, 0 at the initial profile |
//! | `time_paper` | `time_sim - T` with `T` the extinction time; empty if unknown |
//! | `ell`, `h`, `area`, `d` | half meridian length, waist ratio, section area, tip distance measure |
//! | `girth_est`, `girth_candidate` | shortest symmetric closed geodesic and which one it is |
//! | `sc_max`, `lambda_hat` | maximum scalar curvature, tip cigar parameter |
//! | `margin_X` .. `margin_L` | normalized minima of `K_top - K_2`, `K_2 - K_1`, `K_1 - L`, `L` |
//! | `grad_margin_*` | normalized minima of `(K_top)_s`, `(K_1)_s`, `(K_2)_s`, `L_s` |
//! | `cylinder_gap`, `cigar_gap` | distance to the flat cylinder and to the cigar; `NaN` when the window does not fit |
//!
//! Floats are written in shortest round-trip scientific form, so identical runs
//! produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use warpflow_core::{FlowState, GeoSummary};

use crate::error::{Failure, Outcome};

pub const SUMMARY_HEADER: [&str; 20] = [
    "time_sim",
    "time_paper",
    "ell",
    "h",
    "area",
    "d",
    "girth_est",
    "girth_candidate",
    "sc_max",
    "lambda_hat",
    "margin_X",
    "margin_Y",
    "margin_Z",
    "margin_L",
    "grad_margin_ktop",
    "grad_margin_k1",
    "grad_margin_k2",
    "grad_margin_l",
    "cylinder_gap",
    "cigar_gap",
];

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Outcome<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    // write then rename, so readers never see a half-written file
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| Failure::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Failure::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Failure::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Outcome<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn summary_csv(summaries: &[GeoSummary], extinction: Option<f64>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("writing to memory");
    for s in summaries {
        let mut row: Vec<String> = Vec::with_capacity(SUMMARY_HEADER.len());
        row.push(num(s.time));
        row.push(extinction.map_or(String::new(), |t| num(s.time - t)));
        for x in [s.ell, s.h, s.area, s.d, s.girth_est] {
            row.push(num(x));
        }
        row.push(s.girth_candidate.tag().to_string());
        row.push(num(s.sc_max));
        row.push(num(s.lambda_hat));
        row.extend(s.ordering_margins.iter().map(|&x| num(x)));
        row.extend(s.gradient_margins.iter().map(|&x| num(x)));
        row.push(num(s.cylinder_gap));
        row.push(num(s.cigar_gap));
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

#[derive(Serialize)]
struct ProfileSnapshot<'a> {
    schema_version: &'a str,
    index: Option<usize>,
    step: u64,
    time_sim: f64,
    n: usize,
    node_count: usize,
    r: Vec<f64>,
    chi: Vec<f64>,
    psi: Vec<f64>,
    phi: Vec<f64>,
}

/// Node indices for a decimated copy with about `points` entries, always
/// keeping both endpoints.
pub fn decimation(node_count: usize, points: usize) -> Vec<usize> {
    if points >= node_count {
        return (0..node_count).collect();
    }
    let last = node_count - 1;
    let mut idx: Vec<usize> = (0..points).map(|k| (k * last + (points - 1) / 2) / (points - 1)).collect();
    idx.dedup();
    idx
}

pub fn profile_snapshot(state: &FlowState, index: Option<usize>, points: usize) -> Vec<u8> {
    let p = &state.profile;
    let idx = decimation(p.grid().node_count(), points);
    let pick = |f: &[f64]| idx.iter().map(|&i| f[i]).collect::<Vec<f64>>();
    let snap = ProfileSnapshot {
        schema_version: crate::persistence::SCHEMA_VERSION,
        index,
        step: state.step_index,
        time_sim: state.time,
        n: p.dimension(),
        node_count: p.grid().node_count(),
        r: pick(p.grid().nodes()),
        chi: pick(p.chi()),
        psi: pick(p.psi()),
        phi: pick(p.phi()),
    };
    let mut bytes = serde_json::to_vec(&snap).expect("snapshots serialize");
    bytes.push(b'\n');
    bytes
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: String,
    pub exit_code: u8,
    /// `extinction`, `t_end_reached`, `invariant_violation`, `numeric_failure`, ...
    pub reason: String,
    pub diagnostic: Option<String>,
    pub extinction_time: Option<f64>,
    pub final_time: f64,
    pub steps: u64,
    pub rejections: u64,
    pub summary_rows: usize,
    pub initial: String,
    pub n: usize,
    pub tau: Option<f64>,
    pub nodes: usize,
    pub order: u32,
    pub stepper: String,
    pub gauge: String,
    pub resumed_from_step: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimation_keeps_endpoints() {
        assert_eq!(decimation(5, 10), vec![0, 1, 2, 3, 4]);
        let idx = decimation(401, 201);
        assert_eq!(idx.len(), 201);
        assert_eq!((idx[0], idx[200]), (0, 400));
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decimation(801, 3), vec![0, 400, 800]);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1 + 0.2, -1e-300, 6.02e23, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NAN), "NaN");
    }
}
