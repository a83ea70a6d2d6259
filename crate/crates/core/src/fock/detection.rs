//! Threshold (click / no-click) detection, alone or behind a beam splitter.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::channels::beam_splitter_amplitudes;
use super::state::{FockState, C64};
use super::EngineError;

/// Branch of a click measurement.
#[derive(Debug, Clone)]
pub struct ClickOutcome {
    pub probability: f64,
    /// Normalized post-measurement state; `None` when the branch never occurs.
    pub conditioned_state: Option<FockState>,
}

/// Branches below this probability carry no conditioned state.
pub const NULL_BRANCH: f64 = 1e-300;

/// Non-number-resolving detector with an optional accidental-click
/// probability independent of the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub eta: f64,
    pub accidental: f64,
}

impl Detector {
    pub fn new(eta: f64, accidental: f64) -> Result<Self, EngineError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(EngineError::InvalidProbability { name: "eta", value: eta });
        }
        if !(0.0..=1.0).contains(&accidental) {
            return Err(EngineError::InvalidProbability {
                name: "accidental",
                value: accidental,
            });
        }
        Ok(Detector { eta, accidental })
    }

    pub fn ideal() -> Self {
        Detector { eta: 1.0, accidental: 0.0 }
    }

    /// No-click probability given n photons.
    pub fn no_click(&self, n: usize) -> f64 {
        (1.0 - self.accidental) * (1.0 - self.eta).powi(n as i32)
    }
}

fn diag(d: usize, f: impl Fn(usize) -> f64) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| if r == c { C64::new(f(r), 0.0) } else { C64::new(0.0, 0.0) })
}

fn branch(
    state: &FockState,
    mode: &str,
    weights: impl Fn(usize) -> f64,
) -> Result<ClickOutcome, EngineError> {
    let d = state.register().local_dim();
    let k = diag(d, |n| weights(n).max(0.0).sqrt());
    let out = state.apply_kraus(&[mode], &[k])?;
    let probability = out.trace().clamp(0.0, 1.0);
    let conditioned_state = if probability > NULL_BRANCH {
        Some(out.normalize()?)
    } else {
        None
    };
    Ok(ClickOutcome {
        probability,
        conditioned_state,
    })
}

/// Measures a mode with a detector; the conditioned states follow the
/// square-root (Lüders) instrument and keep the measured mode.
pub fn measure_with(
    state: &FockState,
    mode: &str,
    detector: &Detector,
) -> Result<(ClickOutcome, ClickOutcome), EngineError> {
    state.mode(mode)?;
    let click = branch(state, mode, |n| 1.0 - detector.no_click(n))?;
    let no_click = branch(state, mode, |n| detector.no_click(n))?;
    Ok((click, no_click))
}

/// [`measure_with`] for a detector without accidental clicks.
pub fn measure_click(
    state: &FockState,
    mode: &str,
    eta: f64,
) -> Result<(ClickOutcome, ClickOutcome), EngineError> {
    measure_with(state, mode, &Detector::new(eta, 0.0)?)
}

/// Click pattern of two detectors; index `2·first + second`.
pub type Pattern = [f64; 4];

pub fn pattern_index(first: bool, second: bool) -> usize {
    2 * first as usize + second as usize
}

/// Signal no-click operators on the two input modes of a beam splitter
/// followed by one detector per output port.
#[derive(Debug, Clone)]
pub struct PortPovm {
    /// No click at output 1.
    pub quiet_1: DMatrix<C64>,
    /// No click at output 2.
    pub quiet_2: DMatrix<C64>,
    /// Neither output clicks.
    pub quiet_both: DMatrix<C64>,
}

impl PortPovm {
    /// Exact operators in the truncated input basis; the outputs live in an
    /// untruncated space so no photon is lost to the cutoff.
    pub fn new(n_max: usize, phase: f64, eta: f64) -> Self {
        let d = n_max + 1;
        let mut amps = Vec::with_capacity(d * d);
        for n1 in 0..d {
            for n2 in 0..d {
                amps.push((n1 + n2, beam_splitter_amplitudes(n1, n2, phase)));
            }
        }
        let l = 1.0 - eta;
        let build = |w: &dyn Fn(usize, usize) -> f64| {
            DMatrix::from_fn(d * d, d * d, |r, c| {
                let (nr, ar) = &amps[r];
                let (nc, ac) = &amps[c];
                if nr != nc {
                    return C64::new(0.0, 0.0);
                }
                let mut acc = C64::new(0.0, 0.0);
                for ((o1, o2), x) in ar {
                    if let Some((_, y)) = ac.iter().find(|(k, _)| k == &(*o1, *o2)) {
                        acc += x.conj() * y * w(*o1, *o2);
                    }
                }
                acc
            })
        };
        PortPovm {
            quiet_1: build(&|o1, _| l.powi(o1 as i32)),
            quiet_2: build(&|_, o2| l.powi(o2 as i32)),
            quiet_both: build(&|o1, o2| l.powi((o1 + o2) as i32)),
        }
    }

    /// Signal-only pattern operators, indexed by [`pattern_index`].
    pub fn patterns(&self) -> [DMatrix<C64>; 4] {
        let n = self.quiet_1.nrows();
        let id = DMatrix::<C64>::identity(n, n);
        [
            self.quiet_both.clone(),
            &self.quiet_1 - &self.quiet_both,
            &self.quiet_2 - &self.quiet_both,
            id - &self.quiet_1 - &self.quiet_2 + &self.quiet_both,
        ]
    }
}

/// Distribution of the accidental-click pattern from noise photons that
/// enter each input of a 50/50 splitter; each noise photon reaches either
/// output with probability 1/2.
pub fn splitter_noise_pattern(photon_probs: &[f64], eta: f64) -> Pattern {
    let mut dist = [1.0, 0.0, 0.0, 0.0];
    for &n in photon_probs {
        let det = (eta * n).clamp(0.0, 1.0);
        let channel = [1.0 - det, 0.5 * det, 0.5 * det, 0.0];
        dist = or_combine(&dist, &channel);
    }
    dist
}

/// Independent accidental clicks on two separate detectors.
pub fn independent_noise_pattern(first: f64, second: f64) -> Pattern {
    let mut dist = [0.0; 4];
    for a in [false, true] {
        for b in [false, true] {
            let pa = if a { first } else { 1.0 - first };
            let pb = if b { second } else { 1.0 - second };
            dist[pattern_index(a, b)] = pa * pb;
        }
    }
    dist
}

/// Distribution of the elementwise OR of two independent patterns.
pub fn or_combine(x: &Pattern, y: &Pattern) -> Pattern {
    let mut out = [0.0; 4];
    for (i, &px) in x.iter().enumerate() {
        for (j, &py) in y.iter().enumerate() {
            out[i | j] += px * py;
        }
    }
    out
}

/// Pattern operators after merging signal operators with independent
/// accidental clicks.
pub fn with_noise(signal: &[DMatrix<C64>; 4], noise: &Pattern) -> [DMatrix<C64>; 4] {
    let n = signal[0].nrows();
    let mut out: [DMatrix<C64>; 4] = std::array::from_fn(|_| DMatrix::zeros(n, n));
    for (s, op) in signal.iter().enumerate() {
        for (z, &pz) in noise.iter().enumerate() {
            if pz != 0.0 {
                out[s | z] += op * C64::new(pz, 0.0);
            }
        }
    }
    out
}

/// Pattern operators of two separate detectors on two modes.
pub fn separate_detectors(n_max: usize, eta: f64) -> [DMatrix<C64>; 4] {
    let d = n_max + 1;
    let quiet = diag(d, |n| (1.0 - eta).powi(n as i32));
    let loud = DMatrix::<C64>::identity(d, d) - &quiet;
    let one = [quiet, loud];
    std::array::from_fn(|p| one[p >> 1].kronecker(&one[p & 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::channels::apply_beam_splitter;
    use crate::fock::state::ModeRegister;

    fn number_state(labels: &[&str], n_max: usize, occ: &[usize]) -> FockState {
        let reg = ModeRegister::new(labels, n_max).unwrap();
        let mut amps = vec![C64::new(0.0, 0.0); reg.dim()];
        amps[reg.basis_index(occ)] = C64::new(1.0, 0.0);
        FockState::from_amplitudes(reg, &amps).unwrap()
    }

    #[test]
    fn click_probabilities() {
        let v = number_state(&["o"], 2, &[0]);
        let (c, n) = measure_click(&v, "o", 0.5).unwrap();
        assert_eq!(c.probability, 0.0);
        assert!(c.conditioned_state.is_none());
        assert_eq!(n.probability, 1.0);
        let one = number_state(&["o"], 2, &[1]);
        assert!((measure_click(&one, "o", 0.5).unwrap().0.probability - 0.5).abs() < 1e-15);
        let two = number_state(&["o"], 2, &[2]);
        let (c, n) = measure_click(&two, "o", 0.5).unwrap();
        assert!((c.probability - 0.75).abs() < 1e-15);
        assert!((c.probability + n.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accidental_clicks_on_vacuum() {
        let v = number_state(&["o"], 2, &[0]);
        let d = Detector::new(0.5, 0.01).unwrap();
        let (c, _) = measure_with(&v, "o", &d).unwrap();
        assert!((c.probability - 0.01).abs() < 1e-15);
    }

    #[test]
    fn port_povm_matches_explicit_splitter() {
        let n_max = 2;
        let labels = ["a", "b", "x"];
        let reg = ModeRegister::new(&labels, n_max).unwrap();
        // A random-ish pure state with total a+b occupation ≤ 2.
        let amps: Vec<C64> = (0..reg.dim())
            .map(|i| {
                let (a, b) = (reg.occupation(i, 0), reg.occupation(i, 1));
                if a + b <= n_max {
                    C64::new(((i * 7 + 3) % 5) as f64 - 2.0, ((i * 3) % 4) as f64 - 1.5)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let s = FockState::from_amplitudes(reg, &amps).unwrap();
        let (eta, phase) = (0.6, 0.9);
        let povm = PortPovm::new(n_max, phase, eta);
        let ops = povm.patterns();
        let split = apply_beam_splitter(&s, "a", "b", phase).unwrap();
        let sep = separate_detectors(n_max, eta);
        for p in 0..4 {
            let (pa, ra) = s.trace_out_with(&["a", "b"], &ops[p]).unwrap();
            let (pb, rb) = split.trace_out_with(&["a", "b"], &sep[p]).unwrap();
            assert!((pa - pb).abs() < 1e-12, "pattern {p}: {pa} vs {pb}");
            assert!(ra.unwrap().max_abs_diff(&rb.unwrap()) < 1e-12);
        }
    }

    #[test]
    fn noise_patterns_sum_to_one() {
        let z = splitter_noise_pattern(&[0.03, 0.01], 0.5);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // Port-1 accidental probability 1 − Π(1 − ηn/2).
        let p1 = z[pattern_index(true, false)] + z[pattern_index(true, true)];
        let expect = 1.0 - (1.0 - 0.5 * 0.5 * 0.03) * (1.0 - 0.5 * 0.5 * 0.01);
        assert!((p1 - expect).abs() < 1e-15);
        let i = independent_noise_pattern(0.1, 0.2);
        assert!((i[3] - 0.02).abs() < 1e-15);
    }
}
