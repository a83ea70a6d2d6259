//! Simulator for a multiplexed DLCZ entanglement-swapping experiment.
//!
//! * [`params`]: validated parameter sets with provenance.
//! * [`analytic`]: closed-form probabilities, correlations and thresholds.
//! * [`fock`]: truncated Fock-space density-matrix engine.
//! * [`sim`]: seeded Monte Carlo of the multiplexed protocol.
//! * [`output`] and [`cli`]: curve files and the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod fit;
pub mod fock;
pub mod params;
pub mod output;
pub mod sim;

pub use params::{paper_defaults, ExperimentParams};
