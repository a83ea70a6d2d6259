use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{Counts, SwapStatistics};
use super::trial::{run_trial, trial_rng, Arm, HeraldSampling, ProtocolModel, TrialOutcome};
use super::SimError;
use crate::fock::pipeline::{EngineOptions, SwapEngine};
use crate::params::ExperimentParams;

/// Trials per setting can use at most this many low bits of the stream id.
const SETTING_SHIFT: u32 = 40;

/// Stream id for one trial of one measurement setting at one sweep point.
pub fn stream_id(point: u64, setting: u64, trial: u64) -> u64 {
    (point << 52) ^ (setting << SETTING_SHIFT) ^ trial
}

/// Settings of a batch: every fringe phase, then the counting arm.
pub fn settings(n_thetas: usize) -> Vec<Arm> {
    (0..n_thetas)
        .map(Arm::Fringe)
        .chain(std::iter::once(Arm::Counting))
        .collect()
}

/// Outcome sequence of one setting, in trial order.
pub fn trial_sequence(
    model: &ProtocolModel,
    seed: u64,
    point: u64,
    arm: Arm,
    setting: u64,
    n_trials: u64,
) -> Vec<TrialOutcome> {
    (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(model, &mut trial_rng(seed, stream_id(point, setting, i)), arm))
        .collect()
}

fn count_point(model: &ProtocolModel, n_trials: u64, seed: u64, point: u64) -> Counts {
    let k = model.thetas().len();
    let arms = settings(k);
    arms.par_iter()
        .enumerate()
        .map(|(s, &arm)| {
            (0..n_trials)
                .into_par_iter()
                .fold(
                    || Counts::new(k),
                    |mut c, i| {
                        let mut rng = trial_rng(seed, stream_id(point, s as u64, i));
                        let o = run_trial(model, &mut rng, arm);
                        c.record(arm, &o);
                        c
                    },
                )
                .reduce(|| Counts::new(k), |a, b| a.merge(&b))
        })
        .reduce(|| Counts::new(k), |a, b| a.merge(&b))
}

fn check_n(n_trials: u64) -> Result<(), SimError> {
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    if n_trials >= 1 << SETTING_SHIFT {
        return Err(SimError::TooManyTrials(n_trials));
    }
    Ok(())
}

/// `n_trials` trials at every phase in the model grid and in the counting arm.
pub fn run_batch(model: &ProtocolModel, n_trials: u64, seed: u64) -> Result<SwapStatistics, SimError> {
    check_n(n_trials)?;
    Ok(SwapStatistics::from_counts(model.thetas(), count_point(model, n_trials, seed, 0)))
}

/// Builds the model from parameters and runs one batch.
pub fn simulate(
    params: &ExperimentParams,
    opts: EngineOptions,
    thetas: &[f64],
    sampling: HeraldSampling,
    n_trials: u64,
    seed: u64,
) -> Result<SwapStatistics, SimError> {
    let model = ProtocolModel::new(params, opts, thetas, sampling)?;
    run_batch(&model, n_trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Second retrieval time, keeping t₂ − t₁ fixed.
    T2,
    M,
    Chi,
    Theta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::T2 => "t2_us",
            SweepAxis::M => "m_modes",
            SweepAxis::Chi => "chi",
            SweepAxis::Theta => "theta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub params: ExperimentParams,
    pub stats: SwapStatistics,
}

/// Setup shared by every point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub opts: EngineOptions,
    pub thetas: Vec<f64>,
    pub sampling: HeraldSampling,
    pub n_trials: u64,
    pub seed: u64,
}

/// Parameters at one sweep coordinate. Unlike loading, this does not reject
/// a second retrieval past the cutoff: such points simply abort.
pub fn point_params(base: &ExperimentParams, axis: SweepAxis, x: f64) -> Result<ExperimentParams, SimError> {
    let mut p = base.clone();
    match axis {
        SweepAxis::T2 => {
            let dt = base.delta_t_us();
            if x - dt < 0.0 {
                return Err(SimError::BadValue { axis: axis.name(), value: x });
            }
            p.t1_us = x - dt;
            p.t2_us = x;
        }
        SweepAxis::M => {
            if x < 1.0 || x.fract() != 0.0 {
                return Err(SimError::BadValue { axis: axis.name(), value: x });
            }
            p.m_modes = x as u32;
        }
        SweepAxis::Chi => {
            if !(0.0..1.0).contains(&x) {
                return Err(SimError::BadValue { axis: axis.name(), value: x });
            }
            p.chi = x;
        }
        SweepAxis::Theta => {}
    }
    Ok(p)
}

/// One batch per value; values must be ascending.
pub fn sweep(
    base: &ExperimentParams,
    axis: SweepAxis,
    values: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>, SimError> {
    check_n(cfg.n_trials)?;
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SimError::Unsorted);
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = point_params(base, axis, x)?;
            let thetas = match axis {
                SweepAxis::Theta => vec![x],
                _ => cfg.thetas.clone(),
            };
            let engine = SwapEngine::new(&p, cfg.opts)?;
            let model = ProtocolModel::from_engine(&engine, &thetas, cfg.sampling)?;
            let counts = count_point(&model, cfg.n_trials, cfg.seed, i as u64 + 1);
            Ok(SweepPoint {
                x,
                params: p,
                stats: SwapStatistics::from_counts(&thetas, counts),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "t_max_us")]
pub enum CutoffPolicy {
    None,
    Fixed(f64),
}

/// Sets the storage cutoff. Trials whose second retrieval falls after it
/// abort: they count toward throughput but not toward conditional figures.
pub fn apply_cutoff_policy(params: &ExperimentParams, policy: CutoffPolicy) -> Result<ExperimentParams, SimError> {
    let mut p = params.clone();
    match policy {
        CutoffPolicy::None => p.cutoff_us = None,
        CutoffPolicy::Fixed(t) => {
            if !(t > params.t1_us) {
                return Err(SimError::CutoffTooShort { t_max: t, t1: params.t1_us });
            }
            p.cutoff_us = Some(t);
        }
    }
    p.provenance.insert(crate::params::Field::CutoffUs, crate::params::Source::Override);
    Ok(p)
}

/// Pooled quality and rate over a t₂ sweep under a cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffTradeoff {
    pub policy: CutoffPolicy,
    pub accepted_points: Vec<f64>,
    pub pooled: SwapStatistics,
    /// Swap successes per trial over all trials.
    pub accepted_rate: f64,
}

pub fn cutoff_tradeoff(
    base: &ExperimentParams,
    t2_values: &[f64],
    policy: CutoffPolicy,
    cfg: &SweepConfig,
) -> Result<CutoffTradeoff, SimError> {
    let mut p = base.clone();
    if let CutoffPolicy::Fixed(t) = policy {
        // The check is against the earliest first retrieval of the sweep.
        let dt = base.delta_t_us();
        let t1_min = t2_values.first().map(|t| t - dt).unwrap_or(base.t1_us).max(0.0);
        p.t1_us = t1_min;
        p.t2_us = t1_min + dt;
        p = apply_cutoff_policy(&p, CutoffPolicy::Fixed(t))?;
    } else {
        p.cutoff_us = None;
    }
    let pts = sweep(&p, SweepAxis::T2, t2_values, cfg)?;
    let accepted_points = pts
        .iter()
        .filter(|pt| pt.stats.counts.n_aborted == 0)
        .map(|pt| pt.x)
        .collect();
    let counts = pts
        .iter()
        .fold(Counts::new(cfg.thetas.len()), |acc, pt| acc.merge(&pt.stats.counts));
    let pooled = SwapStatistics::from_counts(&cfg.thetas, counts);
    let accepted_rate = pooled.counts.n_es as f64 / pooled.counts.n_trials.max(1) as f64;
    Ok(CutoffTradeoff {
        policy,
        accepted_points,
        pooled,
        accepted_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::theta_grid;
    use crate::params::paper_defaults;

    fn cfg(n: u64) -> SweepConfig {
        SweepConfig {
            opts: EngineOptions::default(),
            thetas: theta_grid(4),
            sampling: HeraldSampling::Conditioned,
            n_trials: n,
            seed: 5,
        }
    }

    #[test]
    fn batch_rejects_zero_trials() {
        let m = ProtocolModel::new(&paper_defaults(), EngineOptions::default(), &[0.0], HeraldSampling::Full)
            .unwrap();
        assert!(matches!(run_batch(&m, 0, 1), Err(SimError::NoTrials)));
    }

    #[test]
    fn sweep_requires_sorted_values() {
        assert!(matches!(
            sweep(&paper_defaults(), SweepAxis::M, &[2.0, 1.0], &cfg(10)),
            Err(SimError::Unsorted)
        ));
    }

    #[test]
    fn t2_sweep_keeps_spacing() {
        let p = point_params(&paper_defaults(), SweepAxis::T2, 30.0).unwrap();
        assert_eq!((p.t1_us, p.t2_us), (28.0, 30.0));
        assert!(point_params(&paper_defaults(), SweepAxis::T2, 1.0).is_err());
    }

    #[test]
    fn cutoff_policy_checks_first_retrieval() {
        let p = paper_defaults();
        assert!(apply_cutoff_policy(&p, CutoffPolicy::Fixed(0.0)).is_err());
        assert_eq!(apply_cutoff_policy(&p, CutoffPolicy::Fixed(5.0)).unwrap().cutoff_us, Some(5.0));
    }

    #[test]
    fn no_policy_matches_plain_sweep() {
        let p = paper_defaults();
        let t2 = [4.0, 20.0];
        let c = cfg(2000);
        let free = cutoff_tradeoff(&p, &t2, CutoffPolicy::None, &c).unwrap();
        let plain = sweep(&p, SweepAxis::T2, &t2, &c).unwrap();
        let merged = plain
            .iter()
            .fold(Counts::new(4), |acc, pt| acc.merge(&pt.stats.counts));
        assert_eq!(free.pooled.counts, merged);
        assert_eq!(free.accepted_points, vec![4.0, 20.0]);
    }

    #[test]
    fn cutoff_drops_late_points() {
        let p = paper_defaults();
        let c = cfg(500);
        let t = cutoff_tradeoff(&p, &[4.0, 20.0], CutoffPolicy::Fixed(10.0), &c).unwrap();
        assert_eq!(t.accepted_points, vec![4.0]);
        assert_eq!(t.pooled.counts.n_aborted, 2500);
        assert_eq!(t.pooled.counts.n_trials, 5000);
    }
}
