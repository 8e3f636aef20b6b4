//! Runs, resumes and sweeps, with their on-disk outputs.
//!
//! A run directory holds
//!
//! ```text
//! summary.csv          one row per monitor step
//! report.json          how the run ended
//! initial.wfp          the initial profile
//! final.wfp            the last state, provenance pointing at initial.wfp
//! profiles/NNNN.json   decimated snapshots, NNNN = summary row / snapshot_every
//! profiles/final.json
//! checkpoints/step_XXXXXXXXXX.wfc   when checkpoint_every > 0
//! plots/*.svg          when plots = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use warpflow_core::verify::{asymptotic_audit, AuditReport, SweepMember};
use warpflow_core::{FlowState, FlowTrajectory, Simulation, TerminationReason};

use crate::config::JobConfig;
use crate::error::{Failure, Outcome, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_OK};
use crate::output::{num, profile_snapshot, summary_csv, write_file, write_json, RunReport};
use crate::persistence::{
    decode_checkpoint, encode_checkpoint, encode_profile, sha256_hex, Provenance, SCHEMA_VERSION,
};
use crate::plot::run_plots;

/// Steps between output flushes when no checkpoint cadence is set.
const CHUNK: u64 = 10_000;

pub fn exit_code_for(reason: TerminationReason) -> u8 {
    match reason {
        TerminationReason::Extinction | TerminationReason::TEndReached => EXIT_OK,
        TerminationReason::InvariantViolation => EXIT_INVARIANT,
        TerminationReason::NumericFailure => EXIT_NUMERIC,
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub exit_code: u8,
    pub report: RunReport,
    /// Summaries and the final state; intermediate snapshots are already on disk.
    pub trajectory: FlowTrajectory,
    pub out: PathBuf,
}

/// Provenance of an evolved state: the generator links, then `evolved` pointing at the initial record.
struct Lineage {
    roots: Vec<Provenance>,
    parent: String,
}

impl Lineage {
    fn chain(&self, state: &FlowState) -> Vec<Provenance> {
        let mut params = BTreeMap::new();
        params.insert("step".to_string(), state.step_index.to_string());
        params.insert("time_sim".to_string(), num(state.time));
        let mut chain = self.roots.clone();
        chain.push(Provenance::evolved(self.parent.clone(), params));
        chain
    }

    fn from_chain(chain: &[Provenance]) -> Outcome<Lineage> {
        match chain.split_last() {
            Some((last, roots)) if last.generator == "evolved" && last.parent.is_some() && !roots.is_empty() => {
                Ok(Lineage { roots: roots.to_vec(), parent: last.parent.clone().unwrap_or_default() })
            }
            _ => Err(Failure::Numeric("checkpoint provenance does not end in an evolved link".to_string())),
        }
    }
}

struct Job<'a> {
    cfg: &'a JobConfig,
    tau: Option<f64>,
    out: &'a Path,
    lineage: Lineage,
    resumed_from: Option<u64>,
}

impl Job<'_> {
    fn write_snapshots(&self, sim: &mut Simulation) -> Outcome<()> {
        let every = self.cfg.run.snapshot_every as usize;
        for st in sim.take_snapshots() {
            let row = sim.summaries().iter().rposition(|s| s.step == st.step_index);
            let Some(row) = row else { continue };
            let path = self.out.join("profiles").join(format!("{:04}.json", row / every));
            write_file(&path, &profile_snapshot(&st, Some(row / every), self.cfg.profile_points))?;
        }
        Ok(())
    }

    fn checkpoint(&self, sim: &Simulation) -> Outcome<()> {
        let parts = sim.parts();
        let bytes = encode_checkpoint(self.cfg, self.tau, parts, self.lineage.chain(&parts.state));
        let path = self.out.join("checkpoints").join(format!("step_{:010}.wfc", parts.state.step_index));
        write_file(&path, &bytes)
    }

    fn drive(&self, mut sim: Simulation) -> Outcome<RunResult> {
        let chunk = if self.cfg.checkpoint_every > 0 { self.cfg.checkpoint_every } else { CHUNK };
        loop {
            let done = sim.advance(chunk).is_some();
            self.write_snapshots(&mut sim)?;
            if done {
                break;
            }
            if self.cfg.checkpoint_every > 0 {
                self.checkpoint(&sim)?;
            }
            let st = sim.state();
            info!("{}: step {} t = {:.6}", self.out.display(), st.step_index, st.time);
        }
        let traj = sim.finish();
        self.finish(traj)
    }

    fn finish(&self, traj: FlowTrajectory) -> Outcome<RunResult> {
        let cfg = self.cfg;
        let last = traj.final_state().expect("a finished run keeps its final state").clone();
        write_file(&self.out.join("profiles").join("final.json"), &profile_snapshot(&last, None, cfg.profile_points))?;
        write_file(&self.out.join("final.wfp"), &encode_profile(&last.profile, self.lineage.chain(&last)))?;
        let paper_zero = traj.extinction_time.or(cfg.exact_extinction());
        write_file(&self.out.join("summary.csv"), &summary_csv(&traj.summaries, paper_zero))?;
        if cfg.plots {
            for (name, svg) in run_plots(&traj.summaries) {
                write_file(&self.out.join("plots").join(name), svg.as_bytes())?;
            }
        }
        let exit_code = exit_code_for(traj.termination_reason);
        let report = RunReport {
            schema_version: SCHEMA_VERSION.to_string(),
            exit_code,
            reason: traj.termination_reason.tag().to_string(),
            diagnostic: traj.diagnostic.clone(),
            extinction_time: traj.extinction_time,
            final_time: last.time,
            steps: traj.steps,
            rejections: traj.rejections,
            summary_rows: traj.summaries.len(),
            initial: cfg.initial.name().to_string(),
            n: cfg.n,
            tau: self.tau.or(cfg.tau),
            nodes: cfg.nodes,
            order: cfg.order.as_u32(),
            stepper: if cfg.run.imex { "imex" } else { "explicit" }.to_string(),
            gauge: cfg.run.gauge.name().to_string(),
            resumed_from_step: self.resumed_from,
        };
        write_json(&self.out.join("report.json"), &report)?;
        match traj.termination_reason {
            TerminationReason::Extinction | TerminationReason::TEndReached => {
                info!("{}: {} after {} steps", self.out.display(), report.reason, report.steps)
            }
            _ => warn!("{}: {} ({})", self.out.display(), report.reason, report.diagnostic.as_deref().unwrap_or("")),
        }
        Ok(RunResult { exit_code, report, trajectory: traj, out: self.out.to_path_buf() })
    }
}

/// Runs `cfg` into `out`. Everything is validated before the first file is written.
pub fn run(cfg: &JobConfig, out: &Path) -> Outcome<RunResult> {
    cfg.check_run()?;
    run_member(cfg, None, out)
}

/// Runs `cfg` with `tau` overriding the configured value.
pub fn run_member(cfg: &JobConfig, tau: Option<f64>, out: &Path) -> Outcome<RunResult> {
    let p = cfg.initial_profile(tau)?;
    let sim = Simulation::new(p.clone(), cfg.run.clone())?;
    let (generator, params) = cfg.generator(tau);
    let roots = vec![Provenance::generated(generator, params)];
    let initial = encode_profile(&p, roots.clone());
    write_file(&out.join("initial.wfp"), &initial)?;
    let job = Job { cfg, tau, out, lineage: Lineage { roots, parent: sha256_hex(&initial) }, resumed_from: None };
    job.drive(sim)
}

/// Default output directory of a resumed run: the run directory holding `checkpoints/`.
pub fn resume_dir(checkpoint: &Path) -> Option<PathBuf> {
    let dir = checkpoint.parent()?;
    if dir.file_name()? == "checkpoints" {
        dir.parent().map(Path::to_path_buf)
    } else {
        None
    }
}

/// Continues a checkpointed run. The continuation takes the same steps the
/// uninterrupted run would have taken, so its `summary.csv` is identical.
pub fn resume(checkpoint: &Path, out: Option<&Path>) -> Outcome<RunResult> {
    let bytes = std::fs::read(checkpoint).map_err(|e| Failure::io(checkpoint, e))?;
    let ck = decode_checkpoint(&bytes)?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None => resume_dir(checkpoint).unwrap_or_else(|| ck.config.out.clone()),
    };
    let lineage = Lineage::from_chain(&ck.provenance)?;
    let step = ck.parts.state.step_index;
    let sim = Simulation::from_parts(ck.parts)?;
    info!("resuming {} at step {step}", checkpoint.display());
    let job = Job { cfg: &ck.config, tau: ck.tau, out: &out, lineage, resumed_from: Some(step) };
    job.drive(sim)
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberRecord {
    pub tau: f64,
    pub out: PathBuf,
    pub exit_code: u8,
    pub reason: String,
    pub diagnostic: Option<String>,
    pub extinction_time: Option<f64>,
    pub final_time: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub exit_code: u8,
    pub members: Vec<MemberRecord>,
    pub audit: Option<AuditReport>,
    pub audit_error: Option<String>,
}

/// Sweep parallelism from `WARPFLOW_THREADS`; `None` leaves the choice to rayon.
pub fn thread_cap() -> Outcome<Option<usize>> {
    match std::env::var("WARPFLOW_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(Failure::Config(format!("WARPFLOW_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

pub fn member_dir(out: &Path, tau: f64) -> PathBuf {
    out.join(format!("tau_{tau}"))
}

/// Runs every `tau` of the sweep in parallel, then audits the members that finished.
pub fn sweep(cfg: &JobConfig, out: &Path) -> Outcome<SweepResult> {
    cfg.check_sweep()?;
    let cap = thread_cap()?;
    let mut taus = cfg.taus.clone();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    // fail on bad data for any member before starting the others
    for &tau in &taus {
        cfg.initial_profile(Some(tau))?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cap {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Failure::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(f64, Outcome<RunResult>)> =
        pool.install(|| taus.par_iter().map(|&tau| (tau, run_member(cfg, Some(tau), &member_dir(out, tau)))).collect());

    let mut members = Vec::new();
    let mut finished = Vec::new();
    for (tau, r) in &results {
        let record = match r {
            Ok(run) => {
                if run.exit_code == EXIT_OK {
                    finished.push(SweepMember { tau: *tau, trajectory: &run.trajectory });
                }
                MemberRecord {
                    tau: *tau,
                    out: run.out.clone(),
                    exit_code: run.exit_code,
                    reason: run.report.reason.clone(),
                    diagnostic: run.report.diagnostic.clone(),
                    extinction_time: run.report.extinction_time,
                    final_time: Some(run.report.final_time),
                }
            }
            Err(e) => {
                warn!("sweep member tau = {tau} failed: {e}");
                MemberRecord {
                    tau: *tau,
                    out: member_dir(out, *tau),
                    exit_code: e.exit_code(),
                    reason: e.tag().to_string(),
                    diagnostic: Some(e.to_string()),
                    extinction_time: None,
                    final_time: None,
                }
            }
        };
        members.push(record);
    }
    let (audit, audit_error) = match asymptotic_audit(&finished, &cfg.audit) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let worst_member = members.iter().map(|m| m.exit_code).max().unwrap_or(EXIT_OK);
    let exit_code = match &audit {
        Some(a) if !a.passed() => EXIT_INVARIANT,
        Some(_) => worst_member,
        None if worst_member == EXIT_OK => EXIT_INVARIANT,
        None => worst_member,
    };
    let result = SweepResult { exit_code, members, audit, audit_error };
    write_json(&out.join("sweep_audit.json"), &sweep_json(cfg, &result))?;
    Ok(result)
}

fn sweep_json(cfg: &JobConfig, r: &SweepResult) -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "exit_code": r.exit_code,
        "passed": r.exit_code == EXIT_OK,
        "n": cfg.n,
        "nodes": cfg.nodes,
        "offsets": cfg.audit.offsets,
        "members": r.members,
        "audit": r.audit.as_ref().map(crate::suites::audit_json),
        "audit_error": r.audit_error,
    })
}
