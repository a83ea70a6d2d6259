use std::f64::consts::PI;

use dlcz_swap::analytic::{
    coincidence_probability, concurrence, concurrence_per_pc, cross_correlation, multiplexed_eg_probability,
    multiplexed_probability, prob_antistokes, prob_stokes, retrieval_efficiency, single_mode_herald_probability,
    suppression, threshold_g, visibility, ConcurrenceInputs, CorrelationPair, Form, Threshold,
};
use dlcz_swap::{paper_defaults, ExperimentParams};
use proptest::prelude::*;

prop_compose! {
    fn physical_params()(
        chi in 1e-4..0.2f64,
        eta in 0.05..=1.0f64,
        gamma0 in 0.05..=1.0f64,
        tau0_us in 10.0..2000.0f64,
        z_b in 0.0..0.01f64,
        z_extra in 0.0..0.01f64,
        xi_se in 0.0..1.0f64,
        f_cav in 0.0..20.0f64,
        m_modes in 1u32..=3,
        t1_us in 0.0..100.0f64,
        dt in 0.1..100.0f64,
    ) -> ExperimentParams {
        let mut p = paper_defaults();
        p.chi = chi;
        p.eta = eta;
        p.gamma0 = gamma0;
        p.tau0_us = tau0_us;
        p.z_b = z_b;
        p.z_ac = z_b + z_extra;
        p.xi_se = xi_se;
        p.f_cav = f_cav;
        p.m_modes = m_modes;
        p.t1_us = t1_us;
        p.t2_us = t1_us + dt;
        p
    }
}

fn v_minus_sqrt_h(g: f64, form: Form) -> f64 {
    let c = CorrelationPair::symmetric(g).unwrap();
    visibility(c, form).value - suppression(c).sqrt()
}

proptest! {
    #[test]
    fn correlation_decays_with_storage(p in physical_params(), z in 1e-4..0.01f64) {
        let gs: Vec<f64> = (0..60).map(|i| cross_correlation(10.0 * i as f64, z, &p).unwrap()).collect();
        for w in gs.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn correlation_grows_with_retrieval(p in physical_params(), z in 1e-4..0.01f64, t in 0.0..400.0f64) {
        let mut q = p.clone();
        q.gamma0 = (p.gamma0 * 0.99).max(1e-3);
        let dg = cross_correlation(t, z, &p).unwrap() - cross_correlation(t, z, &q).unwrap();
        prop_assert!(dg >= 0.0, "g fell by {} when retrieval improved", -dg);
    }

    #[test]
    fn coincidence_fringe_shape(p in physical_params(), theta in -10.0..10.0f64) {
        let c = coincidence_probability(theta, &p).unwrap();
        let c_shift = coincidence_probability(theta + 2.0 * PI, &p).unwrap();
        let hi = coincidence_probability(0.0, &p).unwrap();
        let lo = coincidence_probability(PI, &p).unwrap();
        prop_assert!((c - c_shift).abs() <= 1e-14 * hi);
        prop_assert!(c <= hi * (1.0 + 1e-14) && c >= lo * (1.0 - 1e-14));
    }

    #[test]
    fn detection_efficiency_cancels(p in physical_params(), eta2 in 0.05..=1.0f64) {
        let mut q = p.clone();
        q.eta = eta2;
        let t = p.t2_us;
        prop_assert_eq!(retrieval_efficiency(t, &p).unwrap(), retrieval_efficiency(t, &q).unwrap());
        prop_assert_eq!(cross_correlation(t, p.z_ac, &p).unwrap(), cross_correlation(t, q.z_ac, &q).unwrap());
        let (cp, cq) = (CorrelationPair::from_params(&p).unwrap(), CorrelationPair::from_params(&q).unwrap());
        prop_assert_eq!(cp, cq);
        prop_assert_eq!(visibility(cp, Form::Exact), visibility(cq, Form::Exact));
        prop_assert_eq!(suppression(cp), suppression(cq));
        prop_assert_eq!(concurrence_per_pc(cp), concurrence_per_pc(cq));
        if (eta2 - p.eta).abs() > 1e-3 {
            prop_assert!(prob_stokes(&p) != prob_stokes(&q));
            prop_assert!(prob_antistokes(t, p.z_ac, &p).unwrap() != prob_antistokes(t, q.z_ac, &q).unwrap());
            prop_assert!(coincidence_probability(0.0, &p).unwrap() != coincidence_probability(0.0, &q).unwrap());
            prop_assert!(multiplexed_eg_probability(&p).unwrap() != multiplexed_eg_probability(&q).unwrap());
        }
    }

    #[test]
    fn concurrence_forms_agree_for_rare_clicks(
        q in 1e-5..0.024f64,
        h in 0.0..2.0f64,
        v in 0.0..=1.0f64,
    ) {
        let p11 = h * q * q;
        let p00 = 1.0 - 2.0 * q - p11;
        prop_assume!(p00 >= 0.95);
        let inputs = ConcurrenceInputs::from_probabilities(p00, q, q, p11, v).unwrap();
        let (exact, approx) = (concurrence(&inputs, Form::Exact), concurrence(&inputs, Form::Approx));
        // The exact form carries √p00 on the two-photon term.
        let bound = p11.abs() + (1.0 - inputs.total()).abs() + 2.0 * p11.sqrt() * (1.0 - p00.sqrt());
        prop_assert!((exact - approx).abs() <= bound + 1e-15, "exact {} approx {} bound {}", exact, approx, bound);
    }
}

#[test]
fn visibility_ordering_on_grid() {
    for i in 0..100 {
        for j in 0..100 {
            let g_b = 9.0 + 0.01 + 991.0 * (i as f64 / 99.0).powi(3);
            let g_ac = 9.0 + 0.01 + 991.0 * (j as f64 / 99.0).powi(3);
            let c = CorrelationPair::new(g_b, g_ac).unwrap();
            let (a, x) = (visibility(c, Form::Approx), visibility(c, Form::Exact));
            assert!(x.value <= 1.0, "exact {} at ({g_b}, {g_ac})", x.value);
            assert!(a.value <= x.value, "approx {} > exact {} at ({g_b}, {g_ac})", a.value, x.value);
            assert!(!a.clamped);
        }
    }
}

#[test]
fn thresholds_are_roots() {
    for form in [Form::Approx, Form::Exact] {
        let g = threshold_g(Threshold::Symmetric, form).unwrap();
        assert!(v_minus_sqrt_h(g, form).abs() <= 1e-9);
    }
    let g_ac = threshold_g(Threshold::FixedGb(40.08), Form::Approx).unwrap();
    let c = CorrelationPair::new(40.08, g_ac).unwrap();
    assert!((visibility(c, Form::Approx).value - suppression(c).sqrt()).abs() <= 1e-9);
    assert!((g_ac - 23.788455).abs() < 1e-5);
}

#[test]
fn multiplexing_forms() {
    let m3 = multiplexed_probability(0.5, 3).unwrap();
    assert!((m3.exact - 0.875).abs() < 1e-15);
    assert_eq!(m3.linearized, 1.5);
    let p = paper_defaults();
    let p1 = single_mode_herald_probability(&p);
    let mut one = p.clone();
    one.m_modes = 1;
    assert_eq!(multiplexed_eg_probability(&one).unwrap().exact, p1);
    let three = multiplexed_eg_probability(&p).unwrap();
    assert!((three.linearized - 3.0 * p1).abs() < 1e-15);
    assert!((three.exact / three.linearized - 1.0).abs() < 2.0 * p1);
    assert!(multiplexed_probability(0.1, 0).is_err());
}
