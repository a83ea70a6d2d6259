//! Truncated Fock-space density-matrix engine.

pub mod channels;
pub mod concurrence;
pub mod detection;
pub mod pipeline;
pub mod state;

use thiserror::Error;

use crate::analytic::AnalyticError;

pub use channels::{
    apply_beam_splitter, apply_pair_source, apply_phase, apply_retrieval, inject_leakage,
    inject_noise, LeakClamp,
};
pub use detection::{measure_click, measure_with, ClickOutcome, Detector, PortPovm};
pub use pipeline::{hom_coincidence, swap_pipeline, EngineOptions, HeraldModel, SwapEngine, SwapReport};
pub use state::{FockState, ModeRegister};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("register of {dim} basis states exceeds the cap of {cap} density-matrix entries")]
    DimensionCap { dim: usize, cap: usize },
    #[error("no mode named `{0}`")]
    MissingMode(String),
    #[error("mode `{0}` listed twice")]
    DuplicateMode(String),
    #[error("operation needs two distinct modes, got `{0}` twice")]
    IdenticalModes(String),
    #[error("partial trace must keep at least one mode")]
    EmptyKeep,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("`{name}` = {value} is not a valid probability here")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("leak probability {value} exceeds 1; clamping was not acknowledged")]
    LeakClamp { value: f64 },
    #[error("weight {weight:e} beyond the truncation n_max = {n_max}")]
    TruncationOverflow { weight: f64, n_max: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}
