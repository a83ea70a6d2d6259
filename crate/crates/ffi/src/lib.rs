//! C ABI for the dlcz-swap simulator.
//!
//! Every fallible call returns a [`DlczStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`dlcz_last_error_message`]. Parameter sets are opaque handles owned
//! by the caller and released with [`dlcz_params_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dlcz_swap::analytic::{self, CorrelationPair, Form, Threshold};
use dlcz_swap::fit::theta_grid;
use dlcz_swap::fock::pipeline::{EngineOptions, SwapEngine};
use dlcz_swap::params::{parse_config, Field, Source, ValidationPolicy};
use dlcz_swap::sim::{simulate, HeraldSampling, SimError};
use dlcz_swap::{paper_defaults, ExperimentParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlczStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ComputeError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlczForm {
    Approx = 0,
    Exact = 1,
}

impl From<DlczForm> for Form {
    fn from(f: DlczForm) -> Self {
        match f {
            DlczForm::Approx => Form::Approx,
            DlczForm::Exact => Form::Exact,
        }
    }
}

/// Opaque parameter set.
pub struct DlczParams {
    inner: ExperimentParams,
}

/// Engine figures at one operating point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DlczSwapSummary {
    pub p_es1: f64,
    pub visibility: f64,
    pub suppression: f64,
    pub p_c: f64,
    /// p_c·(V − √h) at the detectors, unclamped.
    pub concurrence: f64,
    pub concurrence_wootters: f64,
    pub concurrence_estimator: f64,
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

/// Monte Carlo estimates; NaN where the counts do not support one.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DlczSimSummary {
    pub n_trials: u64,
    pub n_swaps: u64,
    pub visibility: f64,
    pub visibility_sigma: f64,
    pub suppression: f64,
    pub suppression_sigma: f64,
    pub p_c: f64,
    pub p_c_sigma: f64,
    pub concurrence: f64,
    pub concurrence_sigma: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.as_bytes().to_vec());
}

fn clear_error() {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
}

type FfiResult<T> = Result<T, (DlczStatus, String)>;

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> DlczStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlczStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DlczStatus::Panic
        }
    }
}

fn compute<E: std::fmt::Display>(e: E) -> (DlczStatus, String) {
    (DlczStatus::ComputeError, e.to_string())
}

fn invalid<E: std::fmt::Display>(e: E) -> (DlczStatus, String) {
    (DlczStatus::InvalidArgument, e.to_string())
}

unsafe fn params_ref<'a>(h: *const DlczParams) -> FfiResult<&'a ExperimentParams> {
    h.as_ref()
        .map(|p| &p.inner)
        .ok_or((DlczStatus::NullPointer, "null parameter handle".into()))
}

unsafe fn out_mut<'a, T>(p: *mut T) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or((DlczStatus::NullPointer, "null output pointer".into()))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err((DlczStatus::NullPointer, format!("null {what}")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (DlczStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dlcz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dlcz_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// New handle holding the default operating point; never null.
#[no_mangle]
pub extern "C" fn dlcz_params_new_default() -> *mut DlczParams {
    Box::into_raw(Box::new(DlczParams {
        inner: paper_defaults(),
    }))
}

/// Parses `key = value` lines on top of the defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dlcz_params_from_config(text: *const c_char, out: *mut *mut DlczParams) -> DlczStatus {
    guard(|| {
        let out = out_mut(out)?;
        *out = ptr::null_mut();
        let text = str_arg(text, "config text")?;
        let p = parse_config(text, &[], &ValidationPolicy::default())
            .map_err(|e| (DlczStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(DlczParams { inner: p }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dlcz_params_free(h: *mut DlczParams) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Sets one parameter by key (e.g. `"chi"`, `"cutoff_us"` accepts `"none"`).
/// The handle is left unchanged if the result does not validate.
///
/// # Safety
/// `h` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dlcz_params_set(h: *mut DlczParams, key: *const c_char, value: *const c_char) -> DlczStatus {
    guard(|| {
        let h = h.as_mut().ok_or((DlczStatus::NullPointer, "null parameter handle".to_string()))?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut p = h.inner.clone();
        p.set(key, value, Source::Override)
            .and_then(|_| p.validate(&ValidationPolicy::default()))
            .map_err(invalid)?;
        h.inner = p;
        Ok(())
    })
}

/// Reads one parameter; an unset cutoff reads as NaN.
///
/// # Safety
/// `h` must be a live handle, `key` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_params_get(h: *const DlczParams, key: *const c_char, out: *mut f64) -> DlczStatus {
    guard(|| {
        let p = params_ref(h)?;
        let key = str_arg(key, "key")?;
        let out = out_mut(out)?;
        let f = Field::from_key(key).ok_or((DlczStatus::InvalidArgument, format!("unknown key `{key}`")))?;
        *out = p.get(f).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// γ(t) at storage time `t_us`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_retrieval_efficiency(h: *const DlczParams, t_us: f64, out: *mut f64) -> DlczStatus {
    guard(|| {
        *out_mut(out)? = analytic::retrieval_efficiency(t_us, params_ref(h)?).map_err(invalid)?;
        Ok(())
    })
}

/// Cross-correlation at storage time `t_us` with background `z`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_cross_correlation(h: *const DlczParams, t_us: f64, z: f64, out: *mut f64) -> DlczStatus {
    guard(|| {
        *out_mut(out)? = analytic::cross_correlation(t_us, z, params_ref(h)?).map_err(invalid)?;
        Ok(())
    })
}

/// Swapped-state visibility from the two cross-correlations.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_visibility(g_b: f64, g_ac: f64, form: DlczForm, out: *mut f64) -> DlczStatus {
    guard(|| {
        let corr = CorrelationPair::new(g_b, g_ac).map_err(invalid)?;
        *out_mut(out)? = analytic::visibility(corr, form.into()).value;
        Ok(())
    })
}

/// Suppression parameter h from the two cross-correlations.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_suppression(g_b: f64, g_ac: f64, out: *mut f64) -> DlczStatus {
    guard(|| {
        let corr = CorrelationPair::new(g_b, g_ac).map_err(invalid)?;
        *out_mut(out)? = analytic::suppression(corr);
        Ok(())
    })
}

/// Cross-correlation threshold for positive concurrence. With `g_b_fixed`
/// NaN both correlations are equal; otherwise g_b is held fixed.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_threshold(form: DlczForm, g_b_fixed: f64, out: *mut f64) -> DlczStatus {
    guard(|| {
        let mode = if g_b_fixed.is_nan() {
            Threshold::Symmetric
        } else {
            Threshold::FixedGb(g_b_fixed)
        };
        *out_mut(out)? = analytic::threshold_g(mode, form.into()).map_err(compute)?;
        Ok(())
    })
}

/// Closed-form swap-and-verify coincidence probability at phase `theta`.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_coincidence_probability(h: *const DlczParams, theta: f64, out: *mut f64) -> DlczStatus {
    guard(|| {
        *out_mut(out)? = analytic::coincidence_probability(theta, params_ref(h)?).map_err(invalid)?;
        Ok(())
    })
}

/// Fock-engine figures with a fringe fit over `n_thetas` phases.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_swap_summary(h: *const DlczParams, n_thetas: u32, out: *mut DlczSwapSummary) -> DlczStatus {
    guard(|| {
        let p = params_ref(h)?;
        let out = out_mut(out)?;
        if n_thetas < 2 {
            return Err((DlczStatus::InvalidArgument, "n_thetas must be at least 2".into()));
        }
        let e = SwapEngine::new(p, EngineOptions::default()).map_err(compute)?;
        let d = e.detected_summary(&theta_grid(n_thetas as usize)).map_err(compute)?;
        let r = e.report(0.0).map_err(compute)?;
        *out = DlczSwapSummary {
            p_es1: e.p_es1(),
            visibility: d.visibility,
            suppression: d.h,
            p_c: d.p_c,
            concurrence: d.concurrence,
            concurrence_wootters: r.concurrence_wootters,
            concurrence_estimator: r.concurrence_eq2,
            p00: d.p_ij.p00,
            p01: d.p_ij.p01,
            p10: d.p_ij.p10,
            p11: d.p_ij.p11,
        };
        Ok(())
    })
}

/// Seeded Monte Carlo batch. `conditioned` nonzero starts every trial from
/// two heralded links; zero samples link generation too.
///
/// # Safety
/// `h` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dlcz_simulate(
    h: *const DlczParams,
    n_trials: u64,
    seed: u64,
    n_thetas: u32,
    conditioned: i32,
    out: *mut DlczSimSummary,
) -> DlczStatus {
    guard(|| {
        let p = params_ref(h)?;
        let out = out_mut(out)?;
        if n_thetas < 2 {
            return Err((DlczStatus::InvalidArgument, "n_thetas must be at least 2".into()));
        }
        let sampling = if conditioned != 0 {
            HeraldSampling::Conditioned
        } else {
            HeraldSampling::Full
        };
        let s = simulate(p, EngineOptions::default(), &theta_grid(n_thetas as usize), sampling, n_trials, seed)
            .map_err(|e| match e {
                SimError::Engine(_) => compute(e),
                other => invalid(other),
            })?;
        let split = |e: Option<dlcz_swap::sim::Estimate>| e.map_or((f64::NAN, f64::NAN), |e| (e.value, e.sigma));
        let (v, vs) = split(s.v);
        let (hh, hs) = split(s.h);
        let (pc, pcs) = split(s.p_c);
        let (c, cs) = split(s.concurrence);
        *out = DlczSimSummary {
            n_trials: s.n_trials(),
            n_swaps: s.n_es(),
            visibility: v,
            visibility_sigma: vs,
            suppression: hh,
            suppression_sigma: hs,
            p_c: pc,
            p_c_sigma: pcs,
            concurrence: c,
            concurrence_sigma: cs,
        };
        Ok(())
    })
}
