use dlcz_swap::fit::theta_grid;
use dlcz_swap::fock::concurrence::mode_concurrence;
use dlcz_swap::fock::state::C64;
use dlcz_swap::fock::{
    apply_beam_splitter, apply_pair_source, apply_phase, apply_retrieval, inject_leakage, inject_noise,
    measure_click, swap_pipeline, EngineError, EngineOptions, FockState, HeraldModel, LeakClamp, ModeRegister,
    SwapEngine,
};
use dlcz_swap::paper_defaults;
use proptest::prelude::*;

const MODES: [&str; 3] = ["spin", "opt_a", "opt_b"];
const N_MAX: usize = 2;

#[derive(Debug, Clone)]
enum Op {
    Phase(usize, f64),
    Splitter(f64),
    Noise(usize, f64),
    Leak(f64, f64),
    Retrieve(f64),
    Pair(f64),
    Click(usize, f64, bool),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..3usize, -7.0..7.0f64).prop_map(|(m, t)| Op::Phase(m, t)),
        (-7.0..7.0f64).prop_map(Op::Splitter),
        (1..3usize, 0.0..0.5f64).prop_map(|(m, p)| Op::Noise(m, p)),
        (0.0..1.0f64, 0.0..2.0f64).prop_map(|(x, f)| Op::Leak(x, f)),
        (0.0..=1.0f64).prop_map(Op::Retrieve),
        (0.0..0.5f64).prop_map(Op::Pair),
        (0..3usize, 0.01..=1.0f64, any::<bool>()).prop_map(|(m, e, c)| Op::Click(m, e, c)),
    ]
}

/// Random pure state supported on total occupation ≤ `max_total`.
fn state(max_total: usize) -> impl Strategy<Value = FockState> {
    let reg = ModeRegister::new(&MODES, N_MAX).unwrap();
    let dim = reg.dim();
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_filter_map("zero vector", move |v| {
        let reg = ModeRegister::new(&MODES, N_MAX).unwrap();
        let amps: Vec<C64> = v
            .iter()
            .enumerate()
            .map(|(i, &(re, im))| {
                let total: usize = (0..3).map(|k| reg.occupation(i, k)).sum();
                if total <= max_total {
                    C64::new(re, im)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm < 1e-6 {
            return None;
        }
        let amps: Vec<C64> = amps.iter().map(|a| a / norm.sqrt()).collect();
        FockState::from_amplitudes(reg, &amps).ok()
    })
}

fn apply(s: &FockState, op: &Op) -> Result<Option<FockState>, EngineError> {
    let r = match *op {
        Op::Phase(m, t) => apply_phase(s, MODES[m], t),
        Op::Splitter(ph) => apply_beam_splitter(s, "opt_a", "opt_b", ph),
        Op::Noise(m, p) => inject_noise(s, MODES[m], p),
        Op::Leak(x, f) => inject_leakage(s, "spin", "opt_a", x, f, LeakClamp::Clamp).map(|o| o.state),
        Op::Retrieve(g) => apply_retrieval(s, "spin", "opt_a", g),
        Op::Pair(chi) => apply_pair_source(s, "spin", "opt_b", chi),
        Op::Click(m, eta, click) => {
            let (c, n) = measure_click(s, MODES[m], eta)?;
            return Ok(if click { c } else { n }.conditioned_state);
        }
    };
    match r {
        Ok(s) => Ok(Some(s)),
        Err(EngineError::TruncationOverflow { .. } | EngineError::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn operations_keep_a_density_matrix(s0 in state(N_MAX), ops in proptest::collection::vec(op(), 1..8)) {
        let mut s = s0;
        for op in &ops {
            let Some(next) = apply(&s, op).unwrap() else { continue };
            prop_assert!((next.trace() - 1.0).abs() <= 1e-9, "{:?}: trace {}", op, next.trace());
            prop_assert!(next.min_eigenvalue() >= -1e-9, "{:?}: eigenvalue {}", op, next.min_eigenvalue());
            prop_assert!(next.hermiticity_error() <= 1e-12, "{:?}", op);
            s = next;
        }
    }
}

proptest! {
    #[test]
    fn unitaries_preserve_purity(s in state(N_MAX), m in 0..3usize, t in -7.0..7.0f64) {
        let p0 = s.purity();
        prop_assert!((apply_phase(&s, MODES[m], t).unwrap().purity() - p0).abs() <= 1e-12);
        if let Ok(out) = apply_beam_splitter(&s, "opt_a", "opt_b", t) {
            prop_assert!((out.purity() - p0).abs() <= 1e-12);
        }
    }

    #[test]
    fn noise_never_purifies(s in state(N_MAX - 1), p in 0.0..0.99f64, m in 1..3usize) {
        let p0 = s.purity();
        prop_assert!(inject_noise(&s, MODES[m], p).unwrap().purity() <= p0 + 1e-12);
    }

    #[test]
    fn leakage_never_purifies(s in state(N_MAX), x in 0.0..1.0f64, f in 0.0..1.0f64) {
        let p0 = s.purity();
        let out = inject_leakage(&s, "spin", "opt_a", x, f, LeakClamp::Reject).unwrap();
        prop_assert!(out.state.purity() <= p0 + 1e-12);
    }

    #[test]
    fn click_branches_sum_to_one(s in state(N_MAX), eta in 0.01..=1.0f64, m in 0..3usize) {
        let (c, n) = measure_click(&s, MODES[m], eta).unwrap();
        prop_assert!((c.probability + n.probability - 1.0).abs() <= 1e-12);
    }
}

fn engine_probabilities(e: &SwapEngine) -> Vec<f64> {
    let mut out = vec![e.herald_probability(), e.p_es1()];
    out.extend(e.counting_pattern().unwrap());
    for t in theta_grid(8) {
        out.extend(e.ev_pattern(t).unwrap());
    }
    let m = e.memory_level().unwrap().p_ij;
    out.extend([m.p00, m.p01, m.p10, m.p11]);
    out
}

fn truncation_change(herald: HeraldModel) -> f64 {
    let p = paper_defaults();
    let opts = |n_max| EngineOptions { n_max, herald, ..Default::default() };
    let two = engine_probabilities(&SwapEngine::new(&p, opts(2)).unwrap());
    let three = engine_probabilities(&SwapEngine::new(&p, opts(3)).unwrap());
    two.iter().zip(&three).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn truncation_stability() {
    let chi = paper_defaults().chi;
    let worst = truncation_change(HeraldModel::BellPairs);
    assert!(worst < 10.0 * chi.powi(3), "largest change {worst:e}");
}

/// Multi-pair terms plus read-out noise saturate the top level at n_max = 2.
#[test]
fn stokes_conditioned_truncation_is_second_order() {
    let chi = paper_defaults().chi;
    let worst = truncation_change(HeraldModel::StokesConditioned);
    assert!(worst < 10.0 * chi.powi(2), "largest change {worst:e}");
}

#[test]
fn pipeline_report_at_defaults() {
    let r = swap_pipeline(&paper_defaults(), 0.0).unwrap();
    assert!(r.p_es1 > 0.0 && r.p_es1 < 1.0);
    assert!((r.rho_ac.trace() - 1.0).abs() < 1e-9);
    assert!(r.rho_ac.min_eigenvalue() >= -1e-9);
    let w = mode_concurrence(&r.rho_ac, r.rho_ac.register().labels()[0].as_str(), r.rho_ac.register().labels()[1].as_str())
        .unwrap();
    assert!((w - r.concurrence_wootters).abs() < 1e-12);
    let bound = r.memory.p_ij.p11.abs() + (1.0 - r.memory.p_ij.total()).abs();
    assert!((r.concurrence_wootters - r.concurrence_eq2).abs() <= bound);
}
