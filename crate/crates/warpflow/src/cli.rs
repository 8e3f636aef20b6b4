//! Command line surface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

use crate::config::JobConfig;
use crate::error::{Failure, Outcome, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};
use crate::jobs;
use crate::output::write_json;
use crate::persistence::SCHEMA_VERSION;
use crate::suites::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(name = "warpflow", version, about = "Ricci flow of O(2) x O(n-1)-invariant metrics on S^n")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one flow from a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one flow per `tau` in `taus` and audit the trends across them.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and write verify_<suite>.json.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Continue a run from a checkpoint file.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the run directory holding the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> Outcome<(JobConfig, PathBuf)> {
    let cfg = JobConfig::load(path)?;
    let out = out.unwrap_or_else(|| cfg.out.clone());
    Ok((cfg, out))
}

fn verify(suite: Suite, out: &Path) -> Outcome<u8> {
    let reports = run_suite(suite)?;
    let mut all_passed = true;
    for r in &reports {
        for c in &r.checks {
            let mark = if c.passed { "pass" } else { "FAIL" };
            println!("{mark} {}/{} (margin {:e})", r.suite, c.name, c.worst_margin);
        }
        write_json(&out.join(format!("verify_{}.json", r.suite)), &r.to_json())?;
        all_passed &= r.passed();
    }
    if suite == Suite::All {
        let summary = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "suite": "all",
            "passed": all_passed,
            "suites": reports.iter().map(|r| serde_json::json!({"suite": r.suite, "passed": r.passed()})).collect::<Vec<_>>(),
        });
        write_json(&out.join("verify_all.json"), &summary)?;
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_INVARIANT })
}

pub fn execute(cli: Cli) -> Outcome<u8> {
    match cli.command {
        Command::Run { config, out } => {
            let (cfg, out) = load(&config, out)?;
            let r = jobs::run(&cfg, &out)?;
            println!("{}: {} (exit {})", out.display(), r.report.reason, r.exit_code);
            Ok(r.exit_code)
        }
        Command::Sweep { config, out } => {
            let (cfg, out) = load(&config, out)?;
            let r = jobs::sweep(&cfg, &out)?;
            for m in &r.members {
                println!("tau = {}: {} (exit {})", m.tau, m.reason, m.exit_code);
            }
            match &r.audit {
                Some(a) => {
                    for c in &a.checks {
                        println!("{} {} (margin {:e})", if c.passed { "pass" } else { "FAIL" }, c.name, c.worst_margin);
                    }
                }
                None => println!("audit not run: {}", r.audit_error.as_deref().unwrap_or("")),
            }
            Ok(r.exit_code)
        }
        Command::Verify { suite, out } => verify(suite, &out),
        Command::Resume { checkpoint, out } => {
            let r = jobs::resume(&checkpoint, out.as_deref())?;
            println!("{}: {} (exit {})", r.out.display(), r.report.reason, r.exit_code);
            Ok(r.exit_code)
        }
    }
}

/// Parses `args` and runs the command. Errors are reported on stderr as a
/// JSON line with the exit code and a reason tag.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => {
            info!("exit {code}");
            code
        }
        Err(e) => report_failure(&e),
    }
}

fn report_failure(e: &Failure) -> u8 {
    let line = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "exit_code": e.exit_code(),
        "reason": e.tag(),
        "diagnostic": e.to_string(),
    });
    eprintln!("{line}");
    e.exit_code()
}
