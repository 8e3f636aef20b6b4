//! Numerical core for Ricci flow of `O(2) x O(n-1)`-invariant metrics on `S^n`.
//!
//! An invariant metric is written on the principal part as
//!
//! ```text
//! g = chi(r)^2 dr^2 + psi(r)^2 dtheta^2 + phi(r)^2 g_{S^{n-2}},   r in [0, pi/2]
//! ```
//!
//! where `r = 0` is the circle orbit (the *waist*) and `r = pi/2` is the
//! `S^{n-2}` orbit (the *tip*). Everything in this crate works with the three
//! warping functions sampled on a fixed mesh of `[0, pi/2]`:
//!
//! * [`grid`] owns the mesh, the parity-aware difference stencils and quadrature;
//! * [`metric`] holds [`Profile`] and the pointwise curvature kernels;
//! * [`initial_data`] generates sausage slices, round spheres and the exact
//!   ancient solutions used as oracles;
//! * [`evolve`] integrates the flow with adaptive explicit (or IMEX) steps;
//! * [`diagnostics`] reduces a profile to a [`GeoSummary`];
//! * [`verify`] audits trajectories against exact solutions and known bounds.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and parallel sweeps live in the `warpflow` companion crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod imex;
pub mod initial_data;
pub mod math;
pub mod metric;
pub mod quad;
pub mod verify;

pub use diagnostics::{GeoSummary, GirthCandidate};
pub use error::{Error, Result};
pub use evolve::{FlowState, FlowTrajectory, Gauge, RunConfig, Simulation, TerminationReason};
pub use grid::{Grid, Mesh, Parity, ParityPair, SchemeOrder};
pub use metric::{CurvatureField, Profile};
