//! Command line, file formats and parameter sweeps for `warpflow-core`.
//!
//! * [`config`] parses the flat `key = value` job files;
//! * [`persistence`] reads and writes `.wfp` profiles and `.wfc` checkpoints bit-exactly;
//! * [`jobs`] drives runs, resumes and parallel sweeps and writes their outputs;
//! * [`suites`] holds the `verify` suites;
//! * [`output`] and [`plot`] format CSV, JSON and SVG.

pub mod cli;
pub mod config;
pub mod error;
pub mod jobs;
pub mod output;
pub mod persistence;
pub mod plot;
pub mod suites;

pub use config::JobConfig;
pub use error::{Failure, Outcome};
