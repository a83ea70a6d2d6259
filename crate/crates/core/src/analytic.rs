//! Closed-form expressions for the swap experiment and the threshold root.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ExperimentParams;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("noise probability must be non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("no pairs and no noise: cross-correlation is infinite (ideal interface)")]
    IdealInterface,
    #[error("cross-correlation must exceed 1, got {0}")]
    CorrelationTooSmall(f64),
    #[error("invalid concurrence inputs: {0}")]
    BadInputs(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("mode count must be at least 1")]
    NoModes,
}

/// Which variant of the visibility/concurrence formulas to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// Leading order in 1/g.
    Approx,
    /// Keeps the g − 1 structure.
    Exact,
}

/// γ(t) = γ₀·exp(−t/τ₀).
pub fn retrieval_efficiency(t_us: f64, p: &ExperimentParams) -> Result<f64, AnalyticError> {
    if t_us < 0.0 {
        return Err(AnalyticError::NegativeTime(t_us));
    }
    Ok(p.gamma0 * (-t_us / p.tau0_us).exp())
}

/// Probability of detecting a Stokes photon.
pub fn prob_stokes(p: &ExperimentParams) -> f64 {
    p.chi * p.eta
}

/// Mean number of read-out photons per trial before detection: retrieved
/// signal, background and leakage from unretrieved excitations.
pub fn antistokes_mean(t_us: f64, z: f64, p: &ExperimentParams) -> Result<f64, AnalyticError> {
    if z < 0.0 {
        return Err(AnalyticError::NegativeNoise(z));
    }
    let g = retrieval_efficiency(t_us, p)?;
    Ok(p.chi * g + z + p.chi * (1.0 - g) * p.xi_se * p.f_cav)
}

/// Probability of detecting an anti-Stokes photon.
pub fn prob_antistokes(t_us: f64, z: f64, p: &ExperimentParams) -> Result<f64, AnalyticError> {
    Ok(p.eta * antistokes_mean(t_us, z, p)?)
}

/// Stokes/anti-Stokes cross-correlation; independent of η.
pub fn cross_correlation(t_us: f64, z: f64, p: &ExperimentParams) -> Result<f64, AnalyticError> {
    let g = retrieval_efficiency(t_us, p)?;
    let denom = antistokes_mean(t_us, z, p)?;
    if denom == 0.0 {
        return Err(AnalyticError::IdealInterface);
    }
    Ok(1.0 + g / denom)
}

/// Cross-correlations of the B interfaces at t₁ and of A/C at t₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub g_b: f64,
    pub g_ac: f64,
}

impl CorrelationPair {
    /// Infinite values stand for ideal, noise-free interfaces.
    pub fn new(g_b: f64, g_ac: f64) -> Result<Self, AnalyticError> {
        for g in [g_b, g_ac] {
            if g.is_nan() || g <= 1.0 {
                return Err(AnalyticError::CorrelationTooSmall(g));
            }
        }
        Ok(CorrelationPair { g_b, g_ac })
    }

    pub fn symmetric(g: f64) -> Result<Self, AnalyticError> {
        Self::new(g, g)
    }

    /// g of the B family at `t1_us` and of the A/C family at `t2_us`.
    pub fn at_times(t1_us: f64, t2_us: f64, p: &ExperimentParams) -> Result<Self, AnalyticError> {
        let g_b = cross_correlation(t1_us, p.z_b, p).or_else(ideal)?;
        let g_ac = cross_correlation(t2_us, p.z_ac, p).or_else(ideal)?;
        Self::new(g_b, g_ac)
    }

    pub fn from_params(p: &ExperimentParams) -> Result<Self, AnalyticError> {
        Self::at_times(p.t1_us, p.t2_us, p)
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.g_b + self.g_ac)
    }
}

fn ideal(e: AnalyticError) -> Result<f64, AnalyticError> {
    match e {
        AnalyticError::IdealInterface => Ok(f64::INFINITY),
        other => Err(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub value: f64,
    /// The approximate form went negative and was clamped to 0.
    pub clamped: bool,
}

pub fn visibility(corr: CorrelationPair, form: Form) -> Visibility {
    match form {
        Form::Approx => {
            let v = 1.0 - 4.0 / corr.g_b - 4.0 / corr.g_ac;
            Visibility {
                value: v.max(0.0),
                clamped: v < 0.0,
            }
        }
        Form::Exact => Visibility {
            value: 1.0 / (1.0 + 4.0 / (corr.g_ac - 1.0) + 4.0 / (corr.g_b - 1.0)),
            clamped: false,
        },
    }
}

/// Two-photon suppression h = 8·(1/g_b + 1/g_ac).
pub fn suppression(corr: CorrelationPair) -> f64 {
    8.0 * (1.0 / corr.g_b + 1.0 / corr.g_ac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceInputs {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub v: f64,
    pub p_c: f64,
    pub h: f64,
}

impl ConcurrenceInputs {
    /// Builds inputs from click probabilities, deriving `p_c` and `h`.
    pub fn from_probabilities(
        p00: f64,
        p01: f64,
        p10: f64,
        p11: f64,
        v: f64,
    ) -> Result<Self, AnalyticError> {
        let h = if p10 * p01 > 0.0 {
            p11 / (p10 * p01)
        } else {
            return Err(AnalyticError::BadInputs(
                "p10·p01 = 0 leaves h undefined".into(),
            ));
        };
        let c = ConcurrenceInputs {
            p00,
            p01,
            p10,
            p11,
            v,
            p_c: p10 + p01,
            h,
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<(), AnalyticError> {
        for (name, x) in [
            ("p00", self.p00),
            ("p01", self.p01),
            ("p10", self.p10),
            ("p11", self.p11),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return Err(AnalyticError::BadInputs(format!("{name} = {x} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.v) {
            return Err(AnalyticError::BadInputs(format!("v = {} outside [0, 1]", self.v)));
        }
        if self.h.is_nan() || self.h < 0.0 {
            return Err(AnalyticError::BadInputs(format!("h = {} negative", self.h)));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }
}

/// Concurrence estimate from click statistics, clamped at 0.
pub fn concurrence(inputs: &ConcurrenceInputs, form: Form) -> f64 {
    concurrence_signed(inputs, form).max(0.0)
}

/// The same estimate before the clamp.
pub fn concurrence_signed(inputs: &ConcurrenceInputs, form: Form) -> f64 {
    match form {
        Form::Exact => {
            ((inputs.p10 + inputs.p01) * inputs.v - 2.0 * (inputs.p00 * inputs.p11).sqrt())
                / inputs.total()
        }
        Form::Approx => inputs.p_c * (inputs.v - inputs.h.sqrt()),
    }
}

/// Normalized concurrence C/p_c = V − √h from the approximate forms,
/// before any clamp, so its sign marks the entanglement boundary.
pub fn concurrence_per_pc(corr: CorrelationPair) -> f64 {
    1.0 - 4.0 / corr.g_b - 4.0 / corr.g_ac - suppression(corr).sqrt()
}

/// Coincidence probability between the swap detector and one verification
/// detector as a function of the verification phase.
pub fn coincidence_probability(theta: f64, p: &ExperimentParams) -> Result<f64, AnalyticError> {
    let e1 = p.eta * retrieval_efficiency(p.t1_us, p)?;
    let e2 = p.eta * retrieval_efficiency(p.t2_us, p)?;
    let n1 = prob_antistokes(p.t1_us, p.z_b, p)?;
    let n2 = prob_antistokes(p.t2_us, p.z_ac, p)?;
    Ok(e1 * e2 * (1.0 + theta.cos()) / 2.0 + 2.0 * e2 * n1 + 2.0 * e1 * n2)
}

/// Which threshold equation to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    /// g_b = g_ac = g.
    Symmetric,
    /// Solve for g_ac with g_b held fixed.
    FixedGb(f64),
}

/// Bracket for the threshold search.
pub const THRESHOLD_BRACKET: (f64, f64) = (8.0, 1e4);

/// Root of V − √h = 0 in g.
pub fn threshold_g(mode: Threshold, form: Form) -> Result<f64, AnalyticError> {
    let f = |g: f64| {
        let corr = match mode {
            Threshold::Symmetric => CorrelationPair { g_b: g, g_ac: g },
            Threshold::FixedGb(gb) => CorrelationPair { g_b: gb, g_ac: g },
        };
        let v = match form {
            Form::Approx => 1.0 - 4.0 / corr.g_b - 4.0 / corr.g_ac,
            Form::Exact => visibility(corr, Form::Exact).value,
        };
        v - suppression(corr).sqrt()
    };
    let (lo, hi) = THRESHOLD_BRACKET;
    bisect(f, lo, hi, 1e-13)
}

/// Bisection on a sign-changing bracket down to relative width `rtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rtol: f64) -> Result<f64, AnalyticError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(AnalyticError::NoBracket { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
        if (b - a).abs() <= rtol * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Threshold value quoted alongside the experiment.
pub const REPORTED_THRESHOLD: f64 = 29.3;

/// Probability that one Bell pair is heralded in a single mode: either
/// Stokes photon reaches the heralding detector through the 50/50 combiner.
pub fn single_mode_herald_probability(p: &ExperimentParams) -> f64 {
    1.0 - (1.0 - p.chi * p.eta / 2.0).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplexedProbability {
    pub exact: f64,
    pub linearized: f64,
}

/// Success probability over `m` independent modes, given the single-mode value.
pub fn multiplexed_probability(p1: f64, m: u32) -> Result<MultiplexedProbability, AnalyticError> {
    if m == 0 {
        return Err(AnalyticError::NoModes);
    }
    Ok(MultiplexedProbability {
        exact: 1.0 - (1.0 - p1).powi(m as i32),
        linearized: m as f64 * p1,
    })
}

/// Per-pair entanglement-generation probability per trial.
pub fn multiplexed_eg_probability(
    p: &ExperimentParams,
) -> Result<MultiplexedProbability, AnalyticError> {
    multiplexed_probability(single_mode_herald_probability(p), p.m_modes)
}
