use std::f64::consts::PI;

use dlcz_swap::analytic::{multiplexed_probability, single_mode_herald_probability};
use dlcz_swap::fit::theta_grid;
use dlcz_swap::fock::EngineOptions;
use dlcz_swap::sim::{
    cutoff_tradeoff, run_batch, run_trial, simulate, sweep, trial_rng, trial_sequence, Arm, CutoffPolicy,
    HeraldSampling, ProtocolModel, SimError, SweepAxis, SweepConfig,
};
use dlcz_swap::{paper_defaults, ExperimentParams};

/// 0.99 quantile of χ² with one degree of freedom.
const CHI2_1DOF_P01: f64 = 6.634897;

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

fn cfg(sampling: HeraldSampling, n: u64, thetas: Vec<f64>) -> SweepConfig {
    SweepConfig {
        opts: EngineOptions::default(),
        thetas,
        sampling,
        n_trials: n,
        seed: 11,
    }
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn no_excitation_no_events() {
    let mut p = paper_defaults();
    p.chi = 0.0;
    let m = ProtocolModel::new(&p, EngineOptions::default(), &[0.0], HeraldSampling::Full).unwrap();
    for i in 0..2000 {
        for arm in [Arm::Fringe(0), Arm::Counting] {
            let o = run_trial(&m, &mut trial_rng(3, i), arm);
            assert!(o.eg_mode_ab1.is_none() && o.eg_mode_b2c.is_none() && o.swap_mode.is_none());
            assert!(!(o.es_click || o.ev1_click || o.ev2_click || o.a_click || o.c_click));
        }
    }
}

#[test]
fn destructive_fringe_in_ideal_limit() {
    let s = simulate(&ideal_params(), EngineOptions::default(), &[0.0, PI], HeraldSampling::Conditioned, 100_000, 2)
        .unwrap();
    let dark = s.ev1_given_es[1].unwrap();
    assert!(dark.value <= 3.0 * dark.sigma + 1e-12, "{dark:?}");
    let bright = s.ev1_given_es[0].unwrap();
    // Threshold detection leaves a third of the heralded events in vacuum.
    assert!(bright.z_score(2.0 / 3.0).abs() <= 4.0, "{bright:?}");
}

#[test]
fn multiplexed_success_matches_closed_form() {
    for chi in [0.01, 0.1, 0.3, 0.5] {
        for m in 1..=3u32 {
            let mut p = paper_defaults();
            p.chi = chi;
            p.xi_se = 0.0;
            p.m_modes = m;
            let expected = multiplexed_probability(single_mode_herald_probability(&p), m).unwrap().exact;
            let s = simulate(&p, EngineOptions::default(), &[0.0], HeraldSampling::Full, 100_000, 9).unwrap();
            for e in [s.eg_ab1.unwrap(), s.eg_b2c.unwrap()] {
                let z = e.z_score(expected).abs();
                assert!(z <= 4.0, "chi {chi} m {m}: {} vs {expected} (z {z:.2})", e.value);
            }
        }
    }
}

#[test]
fn links_are_independent() {
    let s = simulate(&paper_defaults(), EngineOptions::default(), &[0.0], HeraldSampling::Full, 500_000, 21).unwrap();
    let t = s.counts.eg_table.map(|x| x as f64);
    let n: f64 = t.iter().sum();
    assert_eq!(n, 1_000_000.0);
    let rows = [t[0] + t[1], t[2] + t[3]];
    let cols = [t[0] + t[2], t[1] + t[3]];
    let mut chi2 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let e = rows[a] * cols[b] / n;
            chi2 += (t[2 * a + b] - e).powi(2) / e;
        }
    }
    assert!(chi2 < CHI2_1DOF_P01, "chi-square {chi2:.3} on {:?}", s.counts.eg_table);
}

#[test]
fn trial_sequences_ignore_worker_count() {
    let m = ProtocolModel::new(&paper_defaults(), EngineOptions::default(), &theta_grid(4), HeraldSampling::Full)
        .unwrap();
    let seq = |workers| pool(workers).install(|| trial_sequence(&m, 42, 0, Arm::Fringe(1), 1, 20_000));
    let one = seq(1);
    assert_eq!(one, seq(3));
    assert_eq!(one, seq(1));
    let stats = |workers| pool(workers).install(|| run_batch(&m, 20_000, 42).unwrap());
    assert_eq!(stats(1), stats(4));
}

#[test]
fn doubling_trials_halves_variance() {
    let run = |n| {
        simulate(&paper_defaults(), EngineOptions::default(), &[0.0], HeraldSampling::Conditioned, n, 8)
            .unwrap()
            .p11
            .unwrap()
    };
    let (a, b) = (run(200_000), run(400_000));
    let ratio = b.sigma.powi(2) / a.sigma.powi(2);
    assert!((ratio / 0.5 - 1.0).abs() <= 0.2, "variance ratio {ratio}");
}

#[test]
fn storage_sweep_degrades_quality() {
    let pts = sweep(
        &paper_defaults(),
        SweepAxis::T2,
        &[2.0, 150.0, 400.0],
        &cfg(HeraldSampling::Conditioned, 100_000, theta_grid(4)),
    )
    .unwrap();
    for w in pts.windows(2) {
        let (v0, v1) = (w[0].stats.v.unwrap().value, w[1].stats.v.unwrap().value);
        let (h0, h1) = (w[0].stats.h.unwrap().value, w[1].stats.h.unwrap().value);
        assert!(v1 < v0, "V {v0} -> {v1}");
        assert!(h1 > h0, "h {h0} -> {h1}");
    }
}

#[test]
fn phase_sweep_is_periodic() {
    let xs = [0.0, PI, 2.0 * PI];
    let pts = sweep(&paper_defaults(), SweepAxis::Theta, &xs, &cfg(HeraldSampling::Conditioned, 100_000, vec![]))
        .unwrap();
    let ev = |i: usize| pts[i].stats.ev1_given_es[0].unwrap();
    let (a, b, c) = (ev(0), ev(1), ev(2));
    assert!((a.value - c.value).abs() <= 4.0 * (a.sigma.powi(2) + c.sigma.powi(2)).sqrt());
    assert!(b.value < a.value - 10.0 * a.sigma);
}

#[test]
fn sweep_validates_axis_values() {
    let c = cfg(HeraldSampling::Full, 10, vec![0.0]);
    let p = paper_defaults();
    assert!(matches!(sweep(&p, SweepAxis::M, &[0.0], &c), Err(SimError::BadValue { .. })));
    assert!(matches!(sweep(&p, SweepAxis::M, &[1.5], &c), Err(SimError::BadValue { .. })));
    assert!(matches!(sweep(&p, SweepAxis::Chi, &[1.0], &c), Err(SimError::BadValue { .. })));
    assert!(matches!(sweep(&p, SweepAxis::T2, &[2.0, 2.0], &c), Err(SimError::Unsorted)));
    assert!(matches!(
        ProtocolModel::new(&p, EngineOptions::default(), &[], HeraldSampling::Full),
        Err(SimError::EmptyGrid)
    ));
}

#[test]
fn early_cutoff_keeps_entanglement() {
    let c = cfg(HeraldSampling::Conditioned, 100_000, theta_grid(8));
    let t2 = [10.0, 25.0, 60.0, 90.0];
    let t = cutoff_tradeoff(&paper_defaults(), &t2, CutoffPolicy::Fixed(40.0), &c).unwrap();
    assert_eq!(t.accepted_points, vec![10.0, 25.0]);
    let conc = t.pooled.concurrence_signed.unwrap();
    assert!(conc.value > 3.0 * conc.sigma, "{conc:?}");
    assert!(t.accepted_rate > 0.0);
}

#[test]
fn distant_cutoff_matches_none() {
    let c = cfg(HeraldSampling::Conditioned, 5_000, theta_grid(4));
    let t2 = [4.0, 30.0];
    let free = cutoff_tradeoff(&paper_defaults(), &t2, CutoffPolicy::None, &c).unwrap();
    let far = cutoff_tradeoff(&paper_defaults(), &t2, CutoffPolicy::Fixed(1e9), &c).unwrap();
    assert_eq!(free.pooled.counts, far.pooled.counts);
    assert_eq!(free.accepted_rate, far.accepted_rate);
}
