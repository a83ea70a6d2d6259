use dlcz_swap::params::{load_params, parse_config, Field, ParamsError, Source, ValidationPolicy};
use dlcz_swap::{paper_defaults, ExperimentParams};
use proptest::prelude::*;

fn strict() -> ValidationPolicy {
    ValidationPolicy::default()
}

prop_compose! {
    fn valid_params()(
        chi in 1e-6..0.999f64,
        eta in 1e-3..=1.0f64,
        gamma0 in 1e-3..=1.0f64,
        tau0_us in 1e-2..1e5f64,
        z_b in 0.0..0.1f64,
        z_extra in 0.0..0.1f64,
        xi_se in 0.0..2.0f64,
        f_cav in 0.0..20.0f64,
        m_modes in 1u32..=3,
        t1_us in 0.0..500.0f64,
        dt in 1e-3..500.0f64,
        cutoff_slack in proptest::option::of(0.0..100.0f64),
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
        p.cutoff_us = cutoff_slack.map(|s| p.t2_us + s);
        p
    }
}

proptest! {
    #[test]
    fn config_round_trip(p in valid_params()) {
        prop_assert!(p.validate(&strict()).is_ok());
        let text = p.to_config_string();
        let back = parse_config(&text, &[], &strict()).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_config_string(), text);
    }

    #[test]
    fn out_of_range_chi_is_an_error(chi in prop_oneof![-10.0..=0.0f64, 1.0..10.0f64]) {
        let r = parse_config(&format!("chi = {chi}"), &[], &strict());
        let is_chi_error = matches!(r, Err(ParamsError::Invalid { field: "chi", .. }));
        prop_assert!(is_chi_error);
    }
}

#[test]
fn every_field_is_range_checked() {
    let cases: [(&str, &str); 11] = [
        ("chi", "0"),
        ("eta", "1.5"),
        ("gamma0", "0"),
        ("tau0_us", "-1"),
        ("z_b", "-0.1"),
        ("z_ac", "-0.1"),
        ("xi_se", "-1"),
        ("f_cav", "-1"),
        ("m_modes", "0"),
        ("t1_us", "-1"),
        ("cutoff_us", "1"),
    ];
    for (key, value) in cases {
        match parse_config(&format!("{key} = {value}"), &[], &strict()) {
            Err(ParamsError::Invalid { field, .. }) => assert_eq!(field, key),
            other => panic!("{key} = {value}: expected a range error, got {other:?}"),
        }
    }
    match parse_config("t1_us = 5\nt2_us = 5", &[], &strict()) {
        Err(ParamsError::Invalid { field, .. }) => assert_eq!(field, "t2_us"),
        other => panic!("expected t2 ordering error, got {other:?}"),
    }
    assert!(matches!(
        parse_config("chi = NaN", &[], &strict()),
        Err(ParamsError::Invalid { field: "chi", .. })
    ));
}

#[test]
fn file_values_over_defaults() {
    let p = parse_config("# measured\nchi = 0.01\neta = 0.5\n", &[], &strict()).unwrap();
    assert_eq!(p, paper_defaults());
    assert_eq!(p.source(Field::Chi), Source::File);
    assert_eq!(p.gamma0, 0.68);
    assert_eq!(p.tau0_us, 320.0);
}

#[test]
fn empty_input_gives_defaults() {
    let p = load_params(None, &[], &strict()).unwrap();
    assert_eq!(p, paper_defaults());
    assert_eq!(p.z_ac, 3e-3);
    assert_eq!(p.source(Field::Eta), Source::Assumed);
    assert_eq!(p.source(Field::Tau0Us), Source::PaperDefault);
}

#[test]
fn chi_above_one_names_the_rule() {
    let e = parse_config("chi = 1.5", &[], &strict()).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("chi") && msg.contains("0 < chi < 1"), "{msg}");
}

#[test]
fn overrides_and_many_modes() {
    let o = vec![("m_modes".to_string(), "5".to_string())];
    assert!(matches!(
        parse_config("", &o, &strict()),
        Err(ParamsError::Invalid { field: "m_modes", .. })
    ));
    let p = parse_config("", &o, &ValidationPolicy { allow_many_modes: true }).unwrap();
    assert_eq!(p.m_modes, 5);
    assert_eq!(p.source(Field::MModes), Source::Override);
}

#[test]
fn noise_ordering_is_a_warning() {
    let p = parse_config("z_b = 0.01\nz_ac = 0.001", &[], &strict()).unwrap();
    assert!(p.warnings().iter().any(|w| w.contains("z_b")));
}

#[test]
fn malformed_lines_report_position() {
    match parse_config("chi = 0.01\nnot a pair", &[], &strict()) {
        Err(ParamsError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config("colour = red", &[], &strict()),
        Err(ParamsError::UnknownKey { .. })
    ));
    assert!(matches!(
        parse_config("chi = lots", &[], &strict()),
        Err(ParamsError::BadValue { .. })
    ));
}

#[test]
fn missing_file_is_io_error() {
    let r = load_params(Some(std::path::Path::new("/nonexistent/params.txt")), &[], &strict());
    assert!(matches!(r, Err(ParamsError::Io { .. })));
}
