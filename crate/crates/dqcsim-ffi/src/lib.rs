//! C ABI over the `dqcsim` command layer.
//!
//! Handles are opaque and owned by the caller once returned; free each with
//! its matching `*_free`. Every fallible call returns a [`DqcStatus`] and
//! leaves a message for [`dqcsim_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dqcsim::cli::{cmd_bound, cmd_run, Mode, RunConfig, RunResult};
use dqcsim::DqcError;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DqcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Precondition = 4,
    SizeCap = 5,
    Simulation = 6,
    Panic = 7,
}

/// How `dqcsim_run` explores client and server randomness.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DqcMode {
    /// Sample mode when a seed is given, enumeration otherwise.
    Auto = 0,
    Sample = 1,
    Enumerate = 2,
}

/// Parsed run configuration.
pub struct DqcConfig(RunConfig);

/// Result of one protocol run.
pub struct DqcRunResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &DqcError) -> DqcStatus {
    match e {
        DqcError::Config(_) | DqcError::Io(_) => DqcStatus::Config,
        DqcError::Precondition(_) | DqcError::InvalidPattern(_) | DqcError::InvalidGraph(_) => DqcStatus::Precondition,
        DqcError::SizeCap(..) => DqcStatus::SizeCap,
        _ => DqcStatus::Simulation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DqcStatus>) -> DqcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DqcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            DqcStatus::Panic
        }
    }
}

fn fail(e: DqcError) -> DqcStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> DqcStatus {
    set_error(format!("null pointer: {what}"));
    DqcStatus::NullPointer
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dqcsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a JSON run configuration.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_config_from_json(json: *const c_char, out: *mut *mut DqcConfig) -> DqcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("config is not UTF-8".into());
            DqcStatus::InvalidUtf8
        })?;
        let cfg = RunConfig::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(DqcConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `dqcsim_config_from_json` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_config_free(cfg: *mut DqcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the configured protocol. `has_seed = false` ignores `seed`.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_run(
    cfg: *const DqcConfig,
    mode: DqcMode,
    has_seed: bool,
    seed: u64,
    out: *mut *mut DqcRunResult,
) -> DqcStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            DqcMode::Auto => None,
            DqcMode::Sample => Some(Mode::Sample),
            DqcMode::Enumerate => Some(Mode::Enumerate),
        };
        let r = cmd_run(&cfg.0, mode, has_seed.then_some(seed)).map_err(fail)?;
        *out = Box::into_raw(Box::new(DqcRunResult(r)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from `dqcsim_run` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_result_free(r: *mut DqcRunResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live result handle; `accepted` and `p_abort` writable.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_result_outcome(
    r: *const DqcRunResult,
    accepted: *mut bool,
    p_abort: *mut f64,
) -> DqcStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        if accepted.is_null() || p_abort.is_null() {
            return Err(null("outputs"));
        }
        *accepted = r.0.accepted;
        *p_abort = r.0.p_abort;
        Ok(())
    })
}

/// Result and transcript as JSON; release with `dqcsim_string_free`.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_result_json(r: *const DqcRunResult, out: *mut *mut c_char) -> DqcStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(r.0.to_json()).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Class E sweep on the configured trap instance.
///
/// # Safety
/// `cfg` must be a live config handle; the three outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dqcsim_bound(
    cfg: *const DqcConfig,
    weight: u32,
    max_p_fail: *mut f64,
    max_bound: *mut f64,
    attacks: *mut usize,
) -> DqcStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if max_p_fail.is_null() || max_bound.is_null() || attacks.is_null() {
            return Err(null("outputs"));
        }
        let (_, r) = cmd_bound(&cfg.0, weight as usize).map_err(fail)?;
        *max_p_fail = r.summary.max_p_fail;
        *max_bound = r.summary.max_bound;
        *attacks = r.summary.attacks;
        Ok(())
    })
}
