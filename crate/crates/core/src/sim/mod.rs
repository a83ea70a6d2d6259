//! Seeded Monte Carlo of the multiplexed protocol.
//!
//! Herald, routing and cutoff are sampled classically; clicks after the
//! swap splitter are drawn from the engine's conditional distributions.

pub mod batch;
pub mod stats;
pub mod trial;

use thiserror::Error;

use crate::fock::EngineError;

pub use batch::{
    apply_cutoff_policy, cutoff_tradeoff, run_batch, simulate, sweep, CutoffPolicy, CutoffTradeoff,
    stream_id, trial_sequence, SweepAxis, SweepConfig, SweepPoint,
};
pub use stats::{Counts, Estimate, SwapStatistics};
pub use trial::{run_trial, trial_rng, Arm, HeraldSampling, ProtocolModel, TrialOutcome};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("{0} trials per setting exceeds the stream budget")]
    TooManyTrials(u64),
    #[error("phase grid is empty")]
    EmptyGrid,
    #[error("sweep values must be strictly ascending")]
    Unsorted,
    #[error("{axis} = {value} is outside the allowed range")]
    BadValue { axis: &'static str, value: f64 },
    #[error("cutoff {t_max} µs must exceed the first retrieval time {t1} µs")]
    CutoffTooShort { t_max: f64, t1: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}
