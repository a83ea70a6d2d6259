//! Physical and protocol parameters with per-field provenance.
//!
//! Configuration files are flat `key = value` text with `#` comments.
//! Times are in microseconds everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("`{key}`: cannot parse value `{value}`")]
    BadValue { key: String, value: String },
    #[error("`{field}` violates rule: {rule}")]
    Invalid { field: &'static str, rule: String },
}

/// Where a parameter value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Experimentally reported value.
    PaperDefault,
    /// Not reported anywhere; a placeholder the user should review.
    Assumed,
    File,
    Override,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::PaperDefault => "default",
            Source::Assumed => "assumed",
            Source::File => "file",
            Source::Override => "override",
        };
        f.write_str(s)
    }
}

/// Configuration keys, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Chi,
    Eta,
    Gamma0,
    Tau0Us,
    ZB,
    ZAc,
    XiSe,
    FCav,
    MModes,
    T1Us,
    T2Us,
    CutoffUs,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::Chi,
        Field::Eta,
        Field::Gamma0,
        Field::Tau0Us,
        Field::ZB,
        Field::ZAc,
        Field::XiSe,
        Field::FCav,
        Field::MModes,
        Field::T1Us,
        Field::T2Us,
        Field::CutoffUs,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Field::Chi => "chi",
            Field::Eta => "eta",
            Field::Gamma0 => "gamma0",
            Field::Tau0Us => "tau0_us",
            Field::ZB => "z_b",
            Field::ZAc => "z_ac",
            Field::XiSe => "xi_se",
            Field::FCav => "f_cav",
            Field::MModes => "m_modes",
            Field::T1Us => "t1_us",
            Field::T2Us => "t2_us",
            Field::CutoffUs => "cutoff_us",
        }
    }

    pub fn from_key(key: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.key() == key)
    }
}

/// Interface label of one memory ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Interface {
    A,
    B1,
    B2,
    C,
}

/// One spatial mode of one interface. Mode indices run from 1 to m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InterfaceId {
    pub label: Interface,
    pub mode_index: u32,
}

impl InterfaceId {
    pub fn new(label: Interface, mode_index: u32, m_modes: u32) -> Result<Self, ParamsError> {
        if mode_index == 0 || mode_index > m_modes {
            return Err(ParamsError::Invalid {
                field: "mode_index",
                rule: format!("must lie in 1..={m_modes}"),
            });
        }
        Ok(InterfaceId { label, mode_index })
    }
}

/// Knobs that relax validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationPolicy {
    /// Permit more than three spatial modes per interface.
    pub allow_many_modes: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub chi: f64,
    pub eta: f64,
    pub gamma0: f64,
    pub tau0_us: f64,
    pub z_b: f64,
    pub z_ac: f64,
    pub xi_se: f64,
    pub f_cav: f64,
    pub m_modes: u32,
    pub t1_us: f64,
    pub t2_us: f64,
    pub cutoff_us: Option<f64>,
    pub provenance: BTreeMap<Field, Source>,
}

/// Equality compares values only; provenance is bookkeeping.
impl PartialEq for ExperimentParams {
    fn eq(&self, other: &Self) -> bool {
        self.chi == other.chi
            && self.eta == other.eta
            && self.gamma0 == other.gamma0
            && self.tau0_us == other.tau0_us
            && self.z_b == other.z_b
            && self.z_ac == other.z_ac
            && self.xi_se == other.xi_se
            && self.f_cav == other.f_cav
            && self.m_modes == other.m_modes
            && self.t1_us == other.t1_us
            && self.t2_us == other.t2_us
            && self.cutoff_us == other.cutoff_us
    }
}

/// The measured operating point: χ=0.01, γ₀=0.68, τ₀=320µs, Z=1e−3,
/// Z′=3e−3, ξ_se=0.3, f=10, m=3. η=0.5 and the storage times are assumed.
pub fn paper_defaults() -> ExperimentParams {
    use Field::*;
    let mut provenance = BTreeMap::new();
    for f in Field::ALL {
        provenance.insert(f, Source::PaperDefault);
    }
    provenance.insert(Eta, Source::Assumed);
    provenance.insert(T1Us, Source::Assumed);
    provenance.insert(CutoffUs, Source::Assumed);
    ExperimentParams {
        chi: 0.01,
        eta: 0.5,
        gamma0: 0.68,
        tau0_us: 320.0,
        z_b: 1e-3,
        z_ac: 3e-3,
        xi_se: 0.3,
        f_cav: 10.0,
        m_modes: 3,
        t1_us: 0.0,
        t2_us: 2.0,
        cutoff_us: None,
        provenance,
    }
}

impl Default for ExperimentParams {
    fn default() -> Self {
        paper_defaults()
    }
}

fn invalid(field: Field, rule: &str) -> ParamsError {
    ParamsError::Invalid {
        field: field.key(),
        rule: rule.to_string(),
    }
}

fn finite(field: Field, v: f64) -> Result<(), ParamsError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

impl ExperimentParams {
    pub fn source(&self, field: Field) -> Source {
        self.provenance.get(&field).copied().unwrap_or(Source::Assumed)
    }

    /// Storage time between the two retrievals.
    pub fn delta_t_us(&self) -> f64 {
        self.t2_us - self.t1_us
    }

    pub fn validate(&self, policy: &ValidationPolicy) -> Result<(), ParamsError> {
        use Field::*;
        for (f, v) in [
            (Chi, self.chi),
            (Eta, self.eta),
            (Gamma0, self.gamma0),
            (Tau0Us, self.tau0_us),
            (ZB, self.z_b),
            (ZAc, self.z_ac),
            (XiSe, self.xi_se),
            (FCav, self.f_cav),
            (T1Us, self.t1_us),
            (T2Us, self.t2_us),
        ] {
            finite(f, v)?;
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(invalid(Chi, "0 < chi < 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid(Eta, "0 < eta <= 1"));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(invalid(Gamma0, "0 < gamma0 <= 1"));
        }
        if self.tau0_us <= 0.0 {
            return Err(invalid(Tau0Us, "tau0_us > 0"));
        }
        if self.z_b < 0.0 {
            return Err(invalid(ZB, "z_b >= 0"));
        }
        if self.z_ac < 0.0 {
            return Err(invalid(ZAc, "z_ac >= 0"));
        }
        if self.xi_se < 0.0 {
            return Err(invalid(XiSe, "xi_se >= 0"));
        }
        if self.f_cav < 0.0 {
            return Err(invalid(FCav, "f_cav >= 0"));
        }
        if self.m_modes == 0 {
            return Err(invalid(MModes, "m_modes >= 1"));
        }
        if self.m_modes > 3 && !policy.allow_many_modes {
            return Err(invalid(
                MModes,
                "m_modes <= 3 unless many modes are explicitly allowed",
            ));
        }
        if self.t1_us < 0.0 {
            return Err(invalid(T1Us, "t1_us >= 0"));
        }
        if self.t2_us <= self.t1_us {
            return Err(invalid(T2Us, "t2_us > t1_us"));
        }
        if let Some(c) = self.cutoff_us {
            finite(CutoffUs, c)?;
            if self.t2_us > c {
                return Err(invalid(CutoffUs, "t2_us <= cutoff_us"));
            }
        }
        Ok(())
    }

    /// Non-fatal oddities worth reporting.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.z_b > self.z_ac {
            out.push(format!(
                "z_b = {} exceeds z_ac = {}; the A/C read also carries the extra pulse noise",
                self.z_b, self.z_ac
            ));
        }
        for f in Field::ALL {
            if self.source(f) == Source::Assumed && f != Field::CutoffUs {
                out.push(format!("`{}` uses an assumed value", f.key()));
            }
        }
        out
    }

    /// Set one field from its textual value, recording `source`.
    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<(), ParamsError> {
        let field = Field::from_key(key).ok_or_else(|| ParamsError::UnknownKey {
            key: key.to_string(),
        })?;
        let bad = || ParamsError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let num = || value.parse::<f64>().map_err(|_| bad());
        match field {
            Field::Chi => self.chi = num()?,
            Field::Eta => self.eta = num()?,
            Field::Gamma0 => self.gamma0 = num()?,
            Field::Tau0Us => self.tau0_us = num()?,
            Field::ZB => self.z_b = num()?,
            Field::ZAc => self.z_ac = num()?,
            Field::XiSe => self.xi_se = num()?,
            Field::FCav => self.f_cav = num()?,
            Field::MModes => self.m_modes = value.parse::<u32>().map_err(|_| bad())?,
            Field::T1Us => self.t1_us = num()?,
            Field::T2Us => self.t2_us = num()?,
            Field::CutoffUs => {
                self.cutoff_us = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num()?)
                }
            }
        }
        self.provenance.insert(field, source);
        Ok(())
    }

    pub fn get(&self, field: Field) -> Option<f64> {
        Some(match field {
            Field::Chi => self.chi,
            Field::Eta => self.eta,
            Field::Gamma0 => self.gamma0,
            Field::Tau0Us => self.tau0_us,
            Field::ZB => self.z_b,
            Field::ZAc => self.z_ac,
            Field::XiSe => self.xi_se,
            Field::FCav => self.f_cav,
            Field::MModes => self.m_modes as f64,
            Field::T1Us => self.t1_us,
            Field::T2Us => self.t2_us,
            Field::CutoffUs => return self.cutoff_us,
        })
    }

    /// Render as a config file that [`parse_config`] reads back to an equal value.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for f in Field::ALL {
            let v = match f {
                Field::MModes => self.m_modes.to_string(),
                Field::CutoffUs => match self.cutoff_us {
                    Some(c) => format!("{c:?}"),
                    None => "none".to_string(),
                },
                _ => format!("{:?}", self.get(f).unwrap_or_default()),
            };
            s.push_str(&format!("{} = {}\n", f.key(), v));
        }
        s
    }
}

/// Parse config text on top of the defaults and validate the result.
pub fn parse_config(
    text: &str,
    overrides: &[(String, String)],
    policy: &ValidationPolicy,
) -> Result<ExperimentParams, ParamsError> {
    let mut p = paper_defaults();
    let mut t2_given = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ParamsError::Parse {
            line: i + 1,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if v.is_empty() {
            return Err(ParamsError::Parse {
                line: i + 1,
                message: format!("missing value for `{k}`"),
            });
        }
        p.set(k, v, Source::File)?;
        t2_given |= k == Field::T2Us.key();
    }
    for (k, v) in overrides {
        p.set(k.trim(), v.trim(), Source::Override)?;
        t2_given |= k.trim() == Field::T2Us.key();
    }
    // An unspecified second retrieval follows the first by the reference 2 µs.
    if !t2_given {
        p.t2_us = p.t1_us + 2.0;
    }
    p.validate(policy)?;
    Ok(p)
}

/// Load parameters from an optional file plus overrides.
pub fn load_params(
    path: Option<&Path>,
    overrides: &[(String, String)],
    policy: &ValidationPolicy,
) -> Result<ExperimentParams, ParamsError> {
    let text = match path {
        Some(path) => std::fs::read_to_string(path).map_err(|source| ParamsError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    parse_config(&text, overrides, policy)
}

/// Split `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), ParamsError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ParamsError::Parse {
        line: 0,
        message: format!("override `{s}` is not of the form key=value"),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict() -> ValidationPolicy {
        ValidationPolicy::default()
    }

    #[test]
    fn defaults_match_reported_operating_point() {
        let p = paper_defaults();
        assert_eq!(p.tau0_us, 320.0);
        assert_eq!(p.gamma0, 0.68);
        assert_eq!(p.z_ac, 3e-3);
        assert_eq!(p.m_modes, 3);
        assert_eq!(p.source(Field::Eta), Source::Assumed);
        assert_eq!(p.source(Field::Chi), Source::PaperDefault);
        p.validate(&strict()).unwrap();
    }

    #[test]
    fn empty_file_gives_defaults() {
        let p = parse_config("", &[], &strict()).unwrap();
        assert_eq!(p, paper_defaults());
    }

    #[test]
    fn file_values_carry_file_provenance() {
        let p = parse_config("chi = 0.01\neta=0.5 # comment\n", &[], &strict()).unwrap();
        assert_eq!(p.chi, 0.01);
        assert_eq!(p.gamma0, 0.68);
        assert_eq!(p.source(Field::Chi), Source::File);
        assert_eq!(p.source(Field::Gamma0), Source::PaperDefault);
    }

    #[test]
    fn overrides_win_over_file() {
        let ov = vec![("chi".to_string(), "0.02".to_string())];
        let p = parse_config("chi = 0.01\n", &ov, &strict()).unwrap();
        assert_eq!(p.chi, 0.02);
        assert_eq!(p.source(Field::Chi), Source::Override);
    }

    #[test]
    fn out_of_range_chi_names_field() {
        let err = parse_config("chi = 1.5\n", &[], &strict()).unwrap_err();
        match err {
            ParamsError::Invalid { field, rule } => {
                assert_eq!(field, "chi");
                assert!(rule.contains("chi < 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_error() {
        assert!(matches!(
            parse_config("chii = 0.1", &[], &strict()),
            Err(ParamsError::UnknownKey { .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse_config("chi = 0.01\nnonsense\n", &[], &strict()) {
            Err(ParamsError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn t2_follows_t1_when_unspecified() {
        let p = parse_config("t1_us = 30", &[], &strict()).unwrap();
        assert_eq!(p.t2_us, 32.0);
    }

    #[test]
    fn cutoff_must_cover_t2() {
        let err = parse_config("cutoff_us = 1", &[], &strict()).unwrap_err();
        assert!(matches!(err, ParamsError::Invalid { field: "cutoff_us", .. }));
        let p = parse_config("cutoff_us = none", &[], &strict()).unwrap();
        assert_eq!(p.cutoff_us, None);
    }

    #[test]
    fn many_modes_need_policy() {
        assert!(parse_config("m_modes = 5", &[], &strict()).is_err());
        let relaxed = ValidationPolicy {
            allow_many_modes: true,
        };
        assert_eq!(parse_config("m_modes = 5", &[], &relaxed).unwrap().m_modes, 5);
    }

    #[test]
    fn noise_ordering_is_only_a_warning() {
        let p = parse_config("z_b = 0.01\nz_ac = 0.001", &[], &strict()).unwrap();
        assert!(p.warnings().iter().any(|w| w.contains("z_b")));
    }

    #[test]
    fn interface_id_range() {
        assert!(InterfaceId::new(Interface::A, 0, 3).is_err());
        assert!(InterfaceId::new(Interface::C, 3, 3).is_ok());
        assert!(InterfaceId::new(Interface::C, 4, 3).is_err());
    }

    #[test]
    fn round_trip_defaults() {
        let p = paper_defaults();
        let q = parse_config(&p.to_config_string(), &[], &strict()).unwrap();
        assert_eq!(p, q);
    }
}
