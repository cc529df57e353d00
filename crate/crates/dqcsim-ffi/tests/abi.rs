use std::ffi::{CStr, CString};
use std::ptr;

use dqcsim_ffi::*;

fn config(json: &str) -> *mut DqcConfig {
    let text = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_config_from_json(text.as_ptr(), &mut cfg) }, DqcStatus::Ok);
    cfg
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(dqcsim_last_error()) }.to_str().unwrap().to_string()
}

fn run_json(cfg: *const DqcConfig, seed: u64) -> String {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_run(cfg, DqcMode::Sample, true, seed, &mut r) }, DqcStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_result_json(r, &mut s) }, DqcStatus::Ok);
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe {
        dqcsim_string_free(s);
        dqcsim_result_free(r);
    }
    out
}

#[test]
fn sampled_runs_repeat_through_the_abi() {
    let cfg = config(r#"{"protocol":"rsp","n":2,"theta":6}"#);
    let a = run_json(cfg, 11);
    assert_eq!(a, run_json(cfg, 11));
    assert!(a.contains("\"accepted\": true"));
    unsafe { dqcsim_config_free(cfg) };
}

#[test]
fn enumerated_attack_reports_abort_probability() {
    let cfg = config(r#"{"protocol":"protocol1","angles":[],"attack":{"1:1":"Z"}}"#);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_run(cfg, DqcMode::Enumerate, false, 0, &mut r) }, DqcStatus::Ok);
    let (mut accepted, mut p_abort) = (true, 0.0);
    assert_eq!(unsafe { dqcsim_result_outcome(r, &mut accepted, &mut p_abort) }, DqcStatus::Ok);
    assert!(!accepted && p_abort > 0.1);
    unsafe {
        dqcsim_result_free(r);
        dqcsim_config_free(cfg);
    }
}

#[test]
fn bound_on_a_single_vertex() {
    let cfg = config(r#"{"angles":[]}"#);
    let (mut f, mut b, mut n) = (1.0, 0.0, 0usize);
    assert_eq!(unsafe { dqcsim_bound(cfg, 1, &mut f, &mut b, &mut n) }, DqcStatus::Ok);
    assert!(n > 0 && f <= 8.0 / 9.0 + 1e-10 && b <= 8.0 / 9.0 + 1e-10);
    unsafe { dqcsim_config_free(cfg) };
}

#[test]
fn errors_map_to_codes_and_messages() {
    let bad = CString::new("{\"protocol\": 3}").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_config_from_json(bad.as_ptr(), &mut cfg) }, DqcStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("config JSON"));

    assert_eq!(unsafe { dqcsim_config_from_json(ptr::null(), &mut cfg) }, DqcStatus::NullPointer);

    let cfg = config(r#"{"protocol":"rsp","theta":9}"#);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { dqcsim_run(cfg, DqcMode::Enumerate, false, 0, &mut r) }, DqcStatus::Config);
    assert!(last_error().contains("theta"));
    assert_eq!(unsafe { dqcsim_run(cfg, DqcMode::Sample, false, 0, &mut r) }, DqcStatus::Config);
    unsafe { dqcsim_config_free(cfg) };
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        dqcsim_config_free(ptr::null_mut());
        dqcsim_result_free(ptr::null_mut());
        dqcsim_string_free(ptr::null_mut());
    }
}
