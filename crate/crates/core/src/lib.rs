//! Set-based state estimation for unknown linear systems, learned from noisy
//! input-output data.
//!
//! The crate has two halves. The offline half turns recorded input-output
//! sequences plus declared noise bounds into a set of models guaranteed to
//! contain the true system matrices ([`learn`]). The online half propagates a
//! state enclosure through that model set and shrinks it with per-sensor
//! measurement updates, keeping the true state inside the reported set at
//! every step ([`estimate`]). Sets are zonotopes or constrained zonotopes;
//! a conventional Kalman filter baseline and a scenario/Monte-Carlo harness
//! round out the crate.

pub mod conzono;
pub mod error;
pub mod estimate;
pub mod interval;
pub mod kalman;
pub mod learn;
mod linalg;
mod lp;
pub mod matrix_set;
pub mod report;
pub mod scenario;
pub mod zonotope;

pub use error::{Error, Result};
pub use interval::{IntervalMatrix, IntervalVector};
pub use matrix_set::MatrixZonotope;
pub use zonotope::Zonotope;
