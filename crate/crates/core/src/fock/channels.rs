//! Unitaries and noise channels on one or two modes.

use nalgebra::DMatrix;

use super::state::{FockState, C64};
use super::EngineError;

/// Quanta below this weight count as absent.
pub const SUPPORT_TOL: f64 = 1e-12;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        0.0
    } else {
        factorial(n) / (factorial(k) * factorial(n - k))
    }
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Output amplitudes of a 50/50 beam splitter for input `|n1, n2⟩`.
///
/// Outputs are `b1 = (a1 + e^{iφ}a2)/√2` and `b2 = (a1 − e^{iφ}a2)/√2`.
/// No truncation is applied: outputs range up to `n1 + n2` quanta.
pub fn beam_splitter_amplitudes(n1: usize, n2: usize, phase: f64) -> Vec<((usize, usize), C64)> {
    let n = n1 + n2;
    let mut amp = vec![zero(); n + 1];
    let pref = C64::from_polar(1.0, phase * n2 as f64)
        / (2f64.powf(n as f64 / 2.0) * (factorial(n1) * factorial(n2)).sqrt());
    for j in 0..=n1 {
        for k in 0..=n2 {
            let sign = if (n2 - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            let c = binomial(n1, j) * binomial(n2, k) * sign;
            let out1 = j + k;
            amp[out1] += pref * c * (factorial(out1) * factorial(n - out1)).sqrt();
        }
    }
    amp.into_iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 1e-15)
        .map(|(k, a)| ((k, n - k), a))
        .collect()
}

fn two_mode_index(d: usize, a: usize, b: usize) -> usize {
    a * d + b
}

/// The beam-splitter unitary restricted to total occupation ≤ `n_max`,
/// where it is exact; higher sectors map to zero.
pub fn beam_splitter_matrix(n_max: usize, phase: f64) -> DMatrix<C64> {
    let d = n_max + 1;
    let mut u = DMatrix::<C64>::zeros(d * d, d * d);
    for n1 in 0..d {
        for n2 in 0..d {
            if n1 + n2 > n_max {
                continue;
            }
            for ((m1, m2), a) in beam_splitter_amplitudes(n1, n2, phase) {
                u[(two_mode_index(d, m1, m2), two_mode_index(d, n1, n2))] = a;
            }
        }
    }
    u
}

/// 50/50 beam splitter between two modes; `mode1` carries output `b1`.
///
/// States with weight above [`SUPPORT_TOL`] on total occupation beyond the
/// truncation are rejected, because the outputs would not fit.
pub fn apply_beam_splitter(
    state: &FockState,
    mode1: &str,
    mode2: &str,
    phase: f64,
) -> Result<FockState, EngineError> {
    if mode1 == mode2 {
        return Err(EngineError::IdenticalModes(mode1.to_string()));
    }
    let n_max = state.register().n_max();
    let overflow = state.weight_where(&[mode1, mode2], |o| o[0] + o[1] > n_max)?;
    if overflow > SUPPORT_TOL {
        return Err(EngineError::TruncationOverflow {
            weight: overflow,
            n_max,
        });
    }
    state.apply_unitary(&[mode1, mode2], &beam_splitter_matrix(n_max, phase))
}

/// Phase rotation `exp(iθ n)`.
pub fn apply_phase(state: &FockState, mode: &str, theta: f64) -> Result<FockState, EngineError> {
    let d = state.register().local_dim();
    let u = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, theta * i as f64)
        } else {
            zero()
        }
    });
    state.apply_unitary(&[mode], &u)
}

fn require_vacuum(state: &FockState, mode: &str) -> Result<(), EngineError> {
    let occupied = 1.0 - state.population(mode, 0)?;
    if occupied > SUPPORT_TOL {
        return Err(EngineError::Precondition(format!(
            "mode `{mode}` must be empty, occupation weight {occupied:e}"
        )));
    }
    Ok(())
}

/// Truncated two-mode squeezing on two empty modes: amplitudes ∝ χ^{n/2} on
/// `|n, n⟩` for n ≤ n_max, renormalized.
pub fn apply_pair_source(
    state: &FockState,
    spin: &str,
    optical: &str,
    chi: f64,
) -> Result<FockState, EngineError> {
    if !(0.0..1.0).contains(&chi) {
        return Err(EngineError::InvalidProbability { name: "chi", value: chi });
    }
    if spin == optical {
        return Err(EngineError::IdenticalModes(spin.to_string()));
    }
    state.mode(spin)?;
    state.mode(optical)?;
    if chi == 0.0 {
        return Ok(state.clone());
    }
    require_vacuum(state, spin)?;
    require_vacuum(state, optical)?;
    let n_max = state.register().n_max();
    let d = n_max + 1;
    let norm: f64 = (0..d).map(|n| chi.powi(n as i32)).sum();
    let mut k = DMatrix::<C64>::zeros(d * d, d * d);
    for n in 0..d {
        k[(two_mode_index(d, n, n), 0)] = C64::new((chi.powi(n as i32) / norm).sqrt(), 0.0);
    }
    state.apply_kraus(&[spin, optical], &[k])
}

/// Transfers each spin excitation into an empty optical mode with amplitude
/// √γ; the rest stays in the spin mode.
pub fn apply_retrieval(
    state: &FockState,
    spin: &str,
    optical: &str,
    gamma_t: f64,
) -> Result<FockState, EngineError> {
    if !(0.0..=1.0).contains(&gamma_t) {
        return Err(EngineError::InvalidProbability { name: "gamma_t", value: gamma_t });
    }
    if spin == optical {
        return Err(EngineError::IdenticalModes(spin.to_string()));
    }
    state.mode(spin)?;
    require_vacuum(state, optical)?;
    let d = state.register().local_dim();
    let mut k = DMatrix::<C64>::zeros(d * d, d * d);
    for n in 0..d {
        for j in 0..=n {
            let a = (binomial(n, j) * gamma_t.powi(j as i32) * (1.0 - gamma_t).powi((n - j) as i32)).sqrt();
            k[(two_mode_index(d, n - j, j), two_mode_index(d, n, 0))] = C64::new(a, 0.0);
        }
    }
    state.apply_kraus(&[spin, optical], &[k])
}

/// Shift by `j` quanta on levels that fit, as a (possibly non-square-sum)
/// partial isometry.
fn shift(d: usize, j: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| {
        if c + j < d && r == c + j {
            C64::new(1.0, 0.0)
        } else {
            zero()
        }
    })
}

/// Levels whose shift by `j` would overflow, each sent to the top level.
fn saturations(d: usize, j: usize) -> Vec<DMatrix<C64>> {
    (0..d)
        .filter(|&c| c + j >= d && j > 0)
        .map(|c| {
            let mut m = DMatrix::<C64>::zeros(d, d);
            m[(d - 1, c)] = C64::new(1.0, 0.0);
            m
        })
        .collect()
}

/// Adds one incoherent photon with probability `p`; the top level saturates.
pub fn inject_noise(state: &FockState, optical: &str, p: f64) -> Result<FockState, EngineError> {
    if !(0.0..1.0).contains(&p) {
        return Err(EngineError::InvalidProbability { name: "p_noise", value: p });
    }
    if p == 0.0 {
        return Ok(state.clone());
    }
    let d = state.register().local_dim();
    let mut kraus = vec![DMatrix::<C64>::identity(d, d) * C64::new((1.0 - p).sqrt(), 0.0)];
    let s = C64::new(p.sqrt(), 0.0);
    kraus.push(shift(d, 1) * s);
    kraus.extend(saturations(d, 1).into_iter().map(|m| m * s));
    state.apply_kraus(&[optical], &kraus)
}

/// What to do when the per-excitation leak probability exceeds one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakClamp {
    Reject,
    Clamp,
}

#[derive(Debug, Clone)]
pub struct LeakageOutcome {
    pub state: FockState,
    /// Probability actually used per excitation.
    pub leak_probability: f64,
    pub clamped: bool,
}

/// Each excitation left in `spin` emits an incoherent photon into `optical`
/// with probability ξ_se·f, capped at 1.
pub fn inject_leakage(
    state: &FockState,
    spin: &str,
    optical: &str,
    xi_se: f64,
    f_cav: f64,
    clamp: LeakClamp,
) -> Result<LeakageOutcome, EngineError> {
    let raw = xi_se * f_cav;
    if !(raw >= 0.0) {
        return Err(EngineError::InvalidProbability { name: "xi_se*f_cav", value: raw });
    }
    let clamped = raw > 1.0;
    if clamped && clamp == LeakClamp::Reject {
        return Err(EngineError::LeakClamp { value: raw });
    }
    let q = raw.min(1.0);
    let d = state.register().local_dim();
    let mut kraus = Vec::new();
    for j in 0..d {
        let diag = DMatrix::<C64>::from_fn(d, d, |r, c| {
            if r == c && c >= j {
                let w = binomial(c, j) * q.powi(j as i32) * (1.0 - q).powi((c - j) as i32);
                C64::new(w.sqrt(), 0.0)
            } else {
                zero()
            }
        });
        if diag.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        kraus.push(diag.kronecker(&shift(d, j)));
        for s in saturations(d, j) {
            kraus.push(diag.kronecker(&s));
        }
    }
    Ok(LeakageOutcome {
        state: state.apply_kraus(&[spin, optical], &kraus)?,
        leak_probability: q,
        clamped,
    })
}
