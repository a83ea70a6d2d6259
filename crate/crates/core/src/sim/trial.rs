use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::fock::detection::Pattern;
use crate::fock::pipeline::{ConditionalTables, EngineOptions, SwapEngine};
use crate::params::ExperimentParams;

/// Whether trials sample the entanglement-generation stage or start from
/// two heralded links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldSampling {
    Full,
    /// Every trial already has both links heralded in mode 1.
    Conditioned,
}

/// Detector arm used after the swap click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Interference of A and C at the phase with this grid index.
    Fringe(usize),
    /// A and C on separate detectors.
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub eg_mode_ab1: Option<u32>,
    pub eg_mode_b2c: Option<u32>,
    /// Lowest mode heralded on both links, routed to the swap.
    pub swap_mode: Option<u32>,
    pub es_click: bool,
    pub ev1_click: bool,
    pub ev2_click: bool,
    pub a_click: bool,
    pub c_click: bool,
    pub t1: f64,
    pub t2: f64,
    pub theta: Option<f64>,
    pub aborted: bool,
}

/// Everything a trial needs, built once per parameter set.
#[derive(Debug, Clone)]
pub struct ProtocolModel {
    pub m_modes: u32,
    pub t1: f64,
    pub t2: f64,
    pub cutoff: Option<f64>,
    pub sampling: HeraldSampling,
    pub tables: ConditionalTables,
}

impl ProtocolModel {
    pub fn new(
        params: &ExperimentParams,
        opts: EngineOptions,
        thetas: &[f64],
        sampling: HeraldSampling,
    ) -> Result<Self, SimError> {
        if thetas.is_empty() {
            return Err(SimError::EmptyGrid);
        }
        let engine = SwapEngine::new(params, opts)?;
        Self::from_engine(&engine, thetas, sampling)
    }

    pub fn from_engine(
        engine: &SwapEngine,
        thetas: &[f64],
        sampling: HeraldSampling,
    ) -> Result<Self, SimError> {
        let p = engine.params();
        Ok(ProtocolModel {
            m_modes: p.m_modes,
            t1: p.t1_us,
            t2: p.t2_us,
            cutoff: p.cutoff_us,
            sampling,
            tables: engine.conditional_tables(thetas)?,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.tables.thetas
    }
}

/// Independent stream for one trial, keyed by master seed and trial index.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample_pattern<R: Rng>(rng: &mut R, p: &Pattern) -> (bool, bool) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w;
        if u < acc {
            return (i & 2 != 0, i & 1 != 0);
        }
    }
    (true, true)
}

/// One trial of the protocol.
pub fn run_trial<R: Rng>(model: &ProtocolModel, rng: &mut R, arm: Arm) -> TrialOutcome {
    let theta = match arm {
        Arm::Fringe(k) => model.tables.thetas.get(k).copied(),
        Arm::Counting => None,
    };
    let mut out = TrialOutcome {
        eg_mode_ab1: None,
        eg_mode_b2c: None,
        swap_mode: None,
        es_click: false,
        ev1_click: false,
        ev2_click: false,
        a_click: false,
        c_click: false,
        t1: model.t1,
        t2: model.t2,
        theta,
        aborted: false,
    };
    if model.cutoff.is_some_and(|c| model.t2 > c) {
        out.aborted = true;
        return out;
    }
    match model.sampling {
        HeraldSampling::Conditioned => {
            out.eg_mode_ab1 = Some(1);
            out.eg_mode_b2c = Some(1);
            out.swap_mode = Some(1);
        }
        HeraldSampling::Full => {
            let p1 = model.tables.herald_probability;
            for i in 1..=model.m_modes {
                let ab1 = rng.gen::<f64>() < p1;
                let b2c = rng.gen::<f64>() < p1;
                if ab1 && out.eg_mode_ab1.is_none() {
                    out.eg_mode_ab1 = Some(i);
                }
                if b2c && out.eg_mode_b2c.is_none() {
                    out.eg_mode_b2c = Some(i);
                }
                if ab1 && b2c && out.swap_mode.is_none() {
                    out.swap_mode = Some(i);
                }
            }
        }
    }
    if out.swap_mode.is_none() {
        return out;
    }
    out.es_click = rng.gen::<f64>() < model.tables.p_es1;
    if !out.es_click {
        return out;
    }
    match arm {
        Arm::Fringe(k) => {
            let (a, b) = sample_pattern(rng, &model.tables.ev[k]);
            out.ev1_click = a;
            out.ev2_click = b;
        }
        Arm::Counting => {
            let (a, c) = sample_pattern(rng, &model.tables.counting);
            out.a_click = a;
            out.c_click = c;
        }
    }
    out
}
