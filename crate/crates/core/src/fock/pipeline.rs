//! The four-ensemble swap: heralded links, retrieval at t₁, swap click,
//! retrieval at t₂ and the verification measurement.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::channels::apply_retrieval;
use super::concurrence::{qubit_block, wootters};
use super::detection::{
    independent_noise_pattern, pattern_index, separate_detectors, splitter_noise_pattern,
    with_noise, Pattern, PortPovm,
};
use super::state::{FockState, ModeRegister, C64, DEFAULT_ENTRY_CAP};
use super::EngineError;
use crate::analytic::{self, single_mode_herald_probability};
use crate::fit::{fit_cosine, theta_grid};
use crate::params::ExperimentParams;

pub const SPIN_A: &str = "spin_A";
pub const SPIN_B1: &str = "spin_B1";
pub const SPIN_B2: &str = "spin_B2";
pub const SPIN_C: &str = "spin_C";
pub const OPT_A: &str = "opt_aS_A";
pub const OPT_B1: &str = "opt_aS_B1";
pub const OPT_B2: &str = "opt_aS_B2";
pub const OPT_C: &str = "opt_aS_C";
const STOKES_1: &str = "opt_S_1";
const STOKES_2: &str = "opt_S_2";

/// How the two heralded links are prepared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeraldModel {
    /// One shared excitation per link, `(|10⟩ ± |01⟩)/√2`; accidental
    /// double pairs enter the read-out channels as incoherent photons.
    BellPairs,
    /// Pair sources on every ensemble and an explicit click on the Stokes
    /// combiner; all multi-pair terms are kept coherently.
    StokesConditioned,
}

/// Relative sign of the heralded single-excitation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgSign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub n_max: usize,
    pub herald: HeraldModel,
    pub eg_sign: EgSign,
    /// Phase between the two paths into the swap splitter.
    pub es_phase: f64,
    pub entry_cap: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            n_max: 2,
            herald: HeraldModel::BellPairs,
            eg_sign: EgSign::Plus,
            es_phase: 0.0,
            entry_cap: DEFAULT_ENTRY_CAP,
        }
    }
}

/// Accidental photons per trial in one read-out channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNoise {
    pub background: f64,
    /// Emission from excitations left behind by an incomplete retrieval.
    pub leakage: f64,
    /// Retrieved photons from an uncorrelated second pair.
    pub double_pair: f64,
}

impl ChannelNoise {
    pub fn total(&self) -> f64 {
        self.background + self.leakage + self.double_pair
    }

    fn at(t_us: f64, z: f64, p: &ExperimentParams, herald: HeraldModel) -> Result<Self, EngineError> {
        let g = analytic::retrieval_efficiency(t_us, p)?;
        Ok(ChannelNoise {
            background: z,
            leakage: p.chi * (1.0 - g) * p.xi_se * p.f_cav,
            double_pair: match herald {
                HeraldModel::BellPairs => p.chi * g,
                HeraldModel::StokesConditioned => 0.0,
            },
        })
    }
}

/// Four click probabilities p00, p01, p10, p11 (first index: A detector).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointClicks {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl JointClicks {
    pub fn from_pattern(p: &Pattern) -> Self {
        JointClicks {
            p00: p[pattern_index(false, false)],
            p01: p[pattern_index(false, true)],
            p10: p[pattern_index(true, false)],
            p11: p[pattern_index(true, true)],
        }
    }

    pub fn as_pattern(&self) -> Pattern {
        [self.p00, self.p01, self.p10, self.p11]
    }

    pub fn total(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }

    pub fn p_c(&self) -> f64 {
        self.p10 + self.p01
    }

    pub fn suppression(&self) -> f64 {
        self.p11 / (self.p10 * self.p01)
    }
}

/// Everything the engine reports at one verification phase.
#[derive(Debug, Clone)]
pub struct SwapReport {
    pub theta: f64,
    /// Swap-detector click probability given both heralds.
    pub p_es1: f64,
    /// Memory state of A and C after the swap click.
    pub rho_ac: FockState,
    /// Click statistics of the counting arm, given the swap click.
    pub p_ij: JointClicks,
    /// Verification click pattern at `theta`, given the swap click.
    pub ev_pattern: JointClicks,
    /// Swap click and first verification click, given both heralds.
    pub p_coinc: f64,
    /// Wootters concurrence of the qubit block of `rho_ac`.
    pub concurrence_wootters: f64,
    /// Click-statistics estimator evaluated on the memory populations and
    /// the ideal-readout fringe.
    pub concurrence_eq2: f64,
    pub memory: MemoryLevel,
}

/// Populations and fringe contrast of the stored A–C state under a perfect
/// readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryLevel {
    pub p_ij: JointClicks,
    pub visibility: f64,
    /// Trace of the {0,1}² block.
    pub block_weight: f64,
}

/// Detected-level summary from a phase scan and the counting arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedSummary {
    pub thetas: Vec<f64>,
    /// P(first verification click | swap click) per phase.
    pub ev1_given_es: Vec<f64>,
    pub p_coinc: Vec<f64>,
    pub visibility: f64,
    pub p_ij: JointClicks,
    pub h: f64,
    pub p_c: f64,
    /// p_c·(V − √h), before clamping.
    pub concurrence: f64,
}

/// Conditional outcome distributions for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTables {
    pub herald_probability: f64,
    pub p_es1: f64,
    pub counting: Pattern,
    pub thetas: Vec<f64>,
    pub ev: Vec<Pattern>,
}

impl ConditionalTables {
    pub fn ev_at(&self, theta: f64) -> Option<&Pattern> {
        self.thetas
            .iter()
            .position(|t| (t - theta).abs() < 1e-12)
            .map(|i| &self.ev[i])
    }
}

/// Precomputed swap stage for one parameter set.
#[derive(Debug, Clone)]
pub struct SwapEngine {
    params: ExperimentParams,
    opts: EngineOptions,
    herald_probability: f64,
    p_es1: f64,
    rho_ac: FockState,
    /// Optical modes A and C after the second retrieval, given the swap click.
    readout: FockState,
    noise_ac: ChannelNoise,
    noise_b: ChannelNoise,
}

fn sign(opts: &EngineOptions) -> f64 {
    match opts.eg_sign {
        EgSign::Plus => 1.0,
        EgSign::Minus => -1.0,
    }
}

fn link_state(
    p: &ExperimentParams,
    opts: &EngineOptions,
    first: &str,
    second: &str,
) -> Result<(FockState, f64), EngineError> {
    match opts.herald {
        HeraldModel::BellPairs => {
            let reg = ModeRegister::with_cap(&[first, second], opts.n_max, opts.entry_cap)?;
            let mut amps = vec![C64::new(0.0, 0.0); reg.dim()];
            let s = 0.5f64.sqrt();
            amps[reg.basis_index(&[1, 0])] = C64::new(s, 0.0);
            amps[reg.basis_index(&[0, 1])] = C64::new(s * sign(opts), 0.0);
            Ok((FockState::from_amplitudes(reg, &amps)?, single_mode_herald_probability(p)))
        }
        HeraldModel::StokesConditioned => {
            use super::channels::apply_pair_source;
            let reg = ModeRegister::with_cap(
                &[first, STOKES_1, second, STOKES_2],
                opts.n_max,
                opts.entry_cap,
            )?;
            let mut s = FockState::vacuum(reg)?;
            s = apply_pair_source(&s, first, STOKES_1, p.chi)?;
            s = apply_pair_source(&s, second, STOKES_2, p.chi)?;
            let povm = PortPovm::new(opts.n_max, 0.0, p.eta);
            let n = povm.quiet_1.nrows();
            let id = DMatrix::<C64>::identity(n, n);
            let click = match opts.eg_sign {
                EgSign::Plus => id - &povm.quiet_1,
                EgSign::Minus => id - &povm.quiet_2,
            };
            let (prob, rest) = s.trace_out_with(&[STOKES_1, STOKES_2], &click)?;
            let rest = rest.ok_or_else(|| EngineError::Numerical("empty link register".into()))?;
            if !(prob > 0.0) {
                return Err(EngineError::Numerical("herald never fires".into()));
            }
            let mut rest = rest;
            rest.scale(1.0 / prob);
            Ok((rest, prob))
        }
    }
}

fn retrieve_into(
    state: &FockState,
    spin: &str,
    optical: &str,
    gamma: f64,
    keep: &[&str],
) -> Result<FockState, EngineError> {
    let s = state.extend(optical)?;
    let s = apply_retrieval(&s, spin, optical, gamma)?;
    s.partial_trace(keep)
}

fn sum_ops(ops: &[DMatrix<C64>; 4], idx: &[usize]) -> DMatrix<C64> {
    let mut out = ops[idx[0]].clone();
    for &i in &idx[1..] {
        out += &ops[i];
    }
    out
}

impl SwapEngine {
    pub fn new(params: &ExperimentParams, opts: EngineOptions) -> Result<Self, EngineError> {
        if !(params.eta > 0.0 && params.eta <= 1.0) {
            return Err(EngineError::InvalidProbability { name: "eta", value: params.eta });
        }
        let g1 = analytic::retrieval_efficiency(params.t1_us, params)?;
        let g2 = analytic::retrieval_efficiency(params.t2_us, params)?;
        let noise_b = ChannelNoise::at(params.t1_us, params.z_b, params, opts.herald)?;
        let noise_ac = ChannelNoise::at(params.t2_us, params.z_ac, params, opts.herald)?;

        let (link1, herald_probability) = link_state(params, &opts, SPIN_A, SPIN_B1)?;
        let (link2, _) = link_state(params, &opts, SPIN_B2, SPIN_C)?;
        let left = retrieve_into(&link1, SPIN_B1, OPT_B1, g1, &[SPIN_A, OPT_B1])?;
        let right = retrieve_into(&link2, SPIN_B2, OPT_B2, g1, &[OPT_B2, SPIN_C])?;
        let swap_in = left.tensor(&right)?;

        let es = PortPovm::new(opts.n_max, opts.es_phase, params.eta).patterns();
        let noise = splitter_noise_pattern(&[noise_b.total(), noise_b.total()], params.eta);
        let es = with_noise(&es, &noise);
        let click = sum_ops(&es, &[pattern_index(true, false), pattern_index(true, true)]);
        let (p_es1, rho) = swap_in.trace_out_with(&[OPT_B1, OPT_B2], &click)?;
        let mut rho_ac = rho.ok_or_else(|| EngineError::Numerical("empty memory register".into()))?;
        if !(p_es1 > 0.0) {
            return Err(EngineError::Numerical("swap detector never fires".into()));
        }
        rho_ac.scale(1.0 / p_es1);

        let r = retrieve_into(&rho_ac, SPIN_A, OPT_A, g2, &[SPIN_C, OPT_A])?;
        let readout = retrieve_into(&r, SPIN_C, OPT_C, g2, &[OPT_A, OPT_C])?;

        Ok(SwapEngine {
            params: params.clone(),
            opts,
            herald_probability,
            p_es1,
            rho_ac,
            readout,
            noise_ac,
            noise_b,
        })
    }

    pub fn params(&self) -> &ExperimentParams {
        &self.params
    }

    pub fn options(&self) -> &EngineOptions {
        &self.opts
    }

    /// Single-mode herald probability of one link.
    pub fn herald_probability(&self) -> f64 {
        self.herald_probability
    }

    pub fn p_es1(&self) -> f64 {
        self.p_es1
    }

    pub fn rho_ac(&self) -> &FockState {
        &self.rho_ac
    }

    pub fn noise_b(&self) -> ChannelNoise {
        self.noise_b
    }

    pub fn noise_ac(&self) -> ChannelNoise {
        self.noise_ac
    }

    /// Verification click pattern given the swap click.
    pub fn ev_pattern(&self, theta: f64) -> Result<Pattern, EngineError> {
        let eta = self.params.eta;
        let ops = PortPovm::new(self.opts.n_max, theta, eta).patterns();
        let n = self.noise_ac.total();
        let ops = with_noise(&ops, &splitter_noise_pattern(&[n, n], eta));
        let mut out = [0.0; 4];
        for (o, op) in out.iter_mut().zip(&ops) {
            *o = self.readout.expectation(&[OPT_A, OPT_C], op)?;
        }
        Ok(out)
    }

    /// Counting-arm click pattern given the swap click.
    pub fn counting_pattern(&self) -> Result<Pattern, EngineError> {
        let eta = self.params.eta;
        let ops = separate_detectors(self.opts.n_max, eta);
        let acc = eta * self.noise_ac.total();
        let ops = with_noise(&ops, &independent_noise_pattern(acc, acc));
        let mut out = [0.0; 4];
        for (o, op) in out.iter_mut().zip(&ops) {
            *o = self.readout.expectation(&[OPT_A, OPT_C], op)?;
        }
        Ok(out)
    }

    /// P(swap click and first verification click | both heralds).
    pub fn p_coinc(&self, theta: f64) -> Result<f64, EngineError> {
        let ev = self.ev_pattern(theta)?;
        Ok(self.p_es1 * (ev[pattern_index(true, false)] + ev[pattern_index(true, true)]))
    }

    pub fn memory_level(&self) -> Result<MemoryLevel, EngineError> {
        let (block, weight) = qubit_block(&self.rho_ac, SPIN_A, SPIN_C)?;
        let p_ij = JointClicks {
            p00: block[(0, 0)].re,
            p01: block[(1, 1)].re,
            p10: block[(2, 2)].re,
            p11: block[(3, 3)].re,
        };
        let thetas = theta_grid(16);
        let mut ys = Vec::with_capacity(thetas.len());
        for &t in &thetas {
            let ops = PortPovm::new(self.opts.n_max, t, 1.0).patterns();
            let click = sum_ops(&ops, &[pattern_index(true, false), pattern_index(true, true)]);
            ys.push(self.rho_ac.expectation(&[SPIN_A, SPIN_C], &click)?);
        }
        let visibility = fit_cosine(&thetas, &ys)
            .map(|f| f.visibility())
            .ok_or_else(|| EngineError::Numerical("degenerate phase grid".into()))?;
        Ok(MemoryLevel {
            p_ij,
            visibility,
            block_weight: weight,
        })
    }

    pub fn report(&self, theta: f64) -> Result<SwapReport, EngineError> {
        let memory = self.memory_level()?;
        let (block, _) = qubit_block(&self.rho_ac, SPIN_A, SPIN_C)?;
        let m = memory.p_ij;
        let eq2 = ((m.p10 + m.p01) * memory.visibility - 2.0 * (m.p00 * m.p11).sqrt()) / m.total();
        Ok(SwapReport {
            theta,
            p_es1: self.p_es1,
            rho_ac: self.rho_ac.clone(),
            p_ij: JointClicks::from_pattern(&self.counting_pattern()?),
            ev_pattern: JointClicks::from_pattern(&self.ev_pattern(theta)?),
            p_coinc: self.p_coinc(theta)?,
            concurrence_wootters: wootters(&block)?,
            concurrence_eq2: eq2.max(0.0),
            memory,
        })
    }

    pub fn detected_summary(&self, thetas: &[f64]) -> Result<DetectedSummary, EngineError> {
        let mut ev1 = Vec::with_capacity(thetas.len());
        for &t in thetas {
            let ev = self.ev_pattern(t)?;
            ev1.push(ev[pattern_index(true, false)] + ev[pattern_index(true, true)]);
        }
        let visibility = fit_cosine(thetas, &ev1)
            .map(|f| f.visibility())
            .ok_or_else(|| EngineError::Numerical("degenerate phase grid".into()))?;
        let p_ij = JointClicks::from_pattern(&self.counting_pattern()?);
        let h = p_ij.suppression();
        Ok(DetectedSummary {
            thetas: thetas.to_vec(),
            p_coinc: ev1.iter().map(|e| e * self.p_es1).collect(),
            ev1_given_es: ev1,
            visibility,
            p_ij,
            h,
            p_c: p_ij.p_c(),
            concurrence: p_ij.p_c() * (visibility - h.sqrt()),
        })
    }

    pub fn conditional_tables(&self, thetas: &[f64]) -> Result<ConditionalTables, EngineError> {
        let ev = thetas
            .iter()
            .map(|&t| self.ev_pattern(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConditionalTables {
            herald_probability: self.herald_probability,
            p_es1: self.p_es1,
            counting: self.counting_pattern()?,
            thetas: thetas.to_vec(),
            ev,
        })
    }
}

/// The closed-form coincidence sums the four heralded excitation
/// configurations without their equal 1/4 weights; multiply engine
/// coincidences by this to compare.
pub const CLOSED_FORM_COINCIDENCE_SCALE: f64 = 4.0;

/// Cross-output coincidence weight after the swap splitter when both
/// read-out modes carry one photon.
pub fn hom_coincidence(opts: &EngineOptions) -> Result<f64, EngineError> {
    use super::channels::apply_beam_splitter;
    let reg = ModeRegister::with_cap(&[OPT_B1, OPT_B2], opts.n_max, opts.entry_cap)?;
    let mut amps = vec![C64::new(0.0, 0.0); reg.dim()];
    amps[reg.basis_index(&[1, 1])] = C64::new(1.0, 0.0);
    let input = FockState::from_amplitudes(reg, &amps)?;
    let out = apply_beam_splitter(&input, OPT_B1, OPT_B2, opts.es_phase)?;
    out.weight_where(&[OPT_B1, OPT_B2], |o| o[0] >= 1 && o[1] >= 1)
}

/// Full pipeline at one verification phase with default options.
pub fn swap_pipeline(params: &ExperimentParams, theta: f64) -> Result<SwapReport, EngineError> {
    SwapEngine::new(params, EngineOptions::default())?.report(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::paper_defaults;

    fn ideal_params() -> ExperimentParams {
        let mut p = paper_defaults();
        p.chi = 0.0;
        p.z_b = 0.0;
        p.z_ac = 0.0;
        p.xi_se = 0.0;
        p.gamma0 = 1.0;
        p.tau0_us = 1e300;
        p.eta = 1.0;
        p
    }

    #[test]
    fn ideal_limit_with_threshold_detectors() {
        let e = SwapEngine::new(&ideal_params(), EngineOptions::default()).unwrap();
        let rho = e.rho_ac();
        let reg = rho.register();
        let i00 = reg.basis_index(&[0, 0]);
        let i01 = reg.basis_index(&[0, 1]);
        let i10 = reg.basis_index(&[1, 0]);
        // Bunched pairs in the swap splitter survive as vacuum.
        assert!((rho.entry(i00, i00).re - 1.0 / 3.0).abs() < 1e-13);
        assert!((rho.entry(i01, i01).re - 1.0 / 3.0).abs() < 1e-13);
        assert!((rho.entry(i10, i10).re - 1.0 / 3.0).abs() < 1e-13);
        assert!((rho.entry(i10, i01).re - 1.0 / 3.0).abs() < 1e-13);
        let r = e.report(0.0).unwrap();
        assert!((r.concurrence_wootters - 2.0 / 3.0).abs() < 1e-7);
        assert!((r.memory.visibility - 1.0).abs() < 1e-12);
        assert!((r.concurrence_eq2 - r.memory.p_ij.p_c()).abs() < 1e-12);
        let d = e.detected_summary(&theta_grid(16)).unwrap();
        assert!((d.visibility - 1.0).abs() < 1e-12);
        assert!(d.h.abs() < 1e-12);
    }

    #[test]
    fn weak_detection_approaches_even_split() {
        let mut p = ideal_params();
        p.eta = 1e-6;
        let e = SwapEngine::new(&p, EngineOptions::default()).unwrap();
        let rho = e.rho_ac();
        let i00 = rho.register().basis_index(&[0, 0]);
        assert!((rho.entry(i00, i00).re - 0.5).abs() < 1e-5);
    }

    #[test]
    fn hom_dip_at_swap_splitter() {
        assert!(hom_coincidence(&EngineOptions::default()).unwrap() < 1e-12);
        let opts = EngineOptions {
            n_max: 3,
            es_phase: 1.1,
            ..EngineOptions::default()
        };
        assert!(hom_coincidence(&opts).unwrap() < 1e-12);
    }

    #[test]
    fn tables_are_distributions() {
        let e = SwapEngine::new(&paper_defaults(), EngineOptions::default()).unwrap();
        let t = e.conditional_tables(&theta_grid(4)).unwrap();
        assert!((t.counting.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for ev in &t.ev {
            assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(ev.iter().all(|&x| x >= -1e-15));
        }
        assert!(t.p_es1 > 0.0 && t.p_es1 < 1.0);
    }

    #[test]
    fn sign_choice_leaves_memory_state() {
        let p = paper_defaults();
        let plus = SwapEngine::new(&p, EngineOptions::default()).unwrap();
        let minus = SwapEngine::new(
            &p,
            EngineOptions {
                eg_sign: EgSign::Minus,
                ..EngineOptions::default()
            },
        )
        .unwrap();
        assert!(plus.rho_ac().max_abs_diff(minus.rho_ac()) < 1e-14);
    }
}
