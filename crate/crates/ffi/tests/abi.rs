use std::ffi::{CStr, CString};
use std::ptr;

use permbet_ffi::*;

fn new_test(config: &str, alpha: f64, futility: f64) -> (PermbetStatus, *mut PermbetTest) {
    let cfg = CString::new(config).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { permbet_test_new(cfg.as_ptr(), alpha, futility, &mut h) };
    (s, h)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(permbet_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn mixture_rejects_after_39_wins() {
    let (s, h) = new_test(r#"{"kind":"mixture_uniform","c":0.04}"#, 0.05, -1.0);
    assert_eq!(s, PermbetStatus::Ok);
    let mut stop = PermbetStopReason::Running;
    let mut t = 0;
    while stop == PermbetStopReason::Running {
        assert_eq!(unsafe { permbet_test_observe(h, 0, &mut stop) }, PermbetStatus::Ok);
        t += 1;
    }
    assert_eq!(stop, PermbetStopReason::Rejected);
    assert_eq!(t, 39);
    let mut st = PermbetState { t: 0, losses: 0, log_wealth: 0.0, p_value: 0.0, stop_reason: PermbetStopReason::Running };
    assert_eq!(unsafe { permbet_test_state(h, &mut st) }, PermbetStatus::Ok);
    assert_eq!(st.t, 39);
    assert!(st.log_wealth >= 20f64.ln() - 1e-12);
    assert!(st.p_value <= 0.05 + 1e-12);
    assert_eq!(unsafe { permbet_test_observe(h, 0, ptr::null_mut()) }, PermbetStatus::AlreadyStopped);
    assert!(last_error().contains("already stopped"));
    unsafe { permbet_test_free(h) };
}

#[test]
fn next_bet_satisfies_constraint() {
    let (_, h) = new_test(r#"{"kind":"mixture_uniform"}"#, 0.05, 0.0);
    for bit in [0u8, 1, 0, 0, 1, 0] {
        unsafe { permbet_test_observe(h, bit, ptr::null_mut()) };
    }
    let (mut b0, mut b1) = (0.0, 0.0);
    assert_eq!(unsafe { permbet_test_next_bet(h, &mut b0, &mut b1) }, PermbetStatus::Ok);
    let (t, l) = (7.0, 2.0);
    assert!((b0 * (t - l) / (t + 1.0) + b1 * (l + 1.0) / (t + 1.0) - 1.0).abs() < 1e-12);
    unsafe { permbet_test_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    assert_eq!(new_test(r#"{"kind":"binomial"}"#, 1.5, -1.0).0, PermbetStatus::InvalidAlpha);
    assert_eq!(new_test(r#"{"kind":"binomial","q":1}"#, 0.05, -1.0).0, PermbetStatus::InvalidConfig);
    assert!(last_error().contains('q'));
    assert_eq!(new_test("not json", 0.05, -1.0).0, PermbetStatus::InvalidConfig);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { permbet_test_new(ptr::null(), 0.05, -1.0, &mut h) }, PermbetStatus::NullPointer);
    assert_eq!(unsafe { permbet_test_observe(ptr::null_mut(), 0, ptr::null_mut()) }, PermbetStatus::NullPointer);
    let mut x = 0.0;
    assert_eq!(unsafe { permbet_perm_pvalue(5, 3, &mut x) }, PermbetStatus::InvalidArgument);
    unsafe { permbet_test_free(ptr::null_mut()) };
}

#[test]
fn closed_forms() {
    let mut x = 0.0;
    unsafe { permbet_perm_pvalue(0, 19, &mut x) };
    assert_eq!(x, 0.05);
    unsafe { permbet_anytime_perm_pvalue(0, 19, 19, &mut x) };
    assert!((x - 0.05).abs() < 1e-15);
    unsafe { permbet_binomial_log_wealth(0, 0, 0.5, &mut x) };
    assert_eq!(x, 0.0);
    unsafe { permbet_mixture_log_wealth(39, 0, 0.04, &mut x) };
    assert!(x >= 20f64.ln());
    unsafe { permbet_mixture_log_wealth(38, 0, 0.04, &mut x) };
    assert!(x < 20f64.ln());
    let bits = [0u8, 1, 0, 1, 1];
    let mut stop = 0;
    assert_eq!(unsafe { permbet_bc_pvalue(bits.as_ptr(), bits.len(), 3, 100, &mut x, &mut stop) }, PermbetStatus::Ok);
    assert_eq!(stop, 5);
    assert!((x - 0.6).abs() < 1e-15);
    let v = unsafe { CStr::from_ptr(permbet_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/permbet.h")).unwrap();
    for name in [
        "permbet_test_new",
        "permbet_test_free",
        "permbet_test_observe",
        "permbet_test_next_bet",
        "permbet_test_state",
        "permbet_binomial_log_wealth",
        "permbet_mixture_log_wealth",
        "permbet_perm_pvalue",
        "permbet_anytime_perm_pvalue",
        "permbet_anytime_bc_pvalue",
        "permbet_bc_pvalue",
        "permbet_last_error",
        "permbet_version",
        "typedef struct PermbetTest PermbetTest",
        "PERMBET_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
