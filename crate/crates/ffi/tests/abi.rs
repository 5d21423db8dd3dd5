use evarkit_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(evk_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn mean_var(xs: &[f64]) -> *mut EvkHypothesis {
    let kind = CString::new(r#"{"kind": "mean_var", "params": {"sigma": 1}}"#).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { evk_hypothesis_builtin(kind.as_ptr(), xs.as_ptr(), xs.len(), &mut h) };
    assert_eq!(s, EvkStatus::Ok, "{}", last_error());
    h
}

#[test]
fn handles_round_trip() {
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let h = mean_var(&xs);
    let (mut len, mut dim) = (0, 0);
    assert_eq!(unsafe { evk_hypothesis_shape(h, &mut len, &mut dim) }, EvkStatus::Ok);
    assert_eq!((len, dim), (5, 3));

    let pi = [0.0, 0.0, 1.0];
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { evk_evar_from_pi(h, pi.as_ptr(), 3, 1e-9, &mut e) }, EvkStatus::Ok);
    let mut n = 0;
    assert_eq!(unsafe { evk_evar_len(e, &mut n) }, EvkStatus::Ok);
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { evk_evar_values(e, buf.as_mut_ptr(), n) }, EvkStatus::Ok);
    assert_eq!(buf, vec![4.0, 1.0, 0.0, 1.0, 4.0]);
    let mut short = [0.0; 2];
    assert_eq!(unsafe { evk_evar_values(e, short.as_mut_ptr(), 2) }, EvkStatus::InvalidInput);

    let mut value = 0.0;
    let mut verdict = EvkVerdict::Violated;
    assert_eq!(unsafe { evk_worst_case(e, h, 1e-9, &mut value, &mut verdict) }, EvkStatus::Ok);
    assert!((value - 1.0).abs() < 1e-12);
    assert_eq!(verdict, EvkVerdict::EVariable);
    let mut ok = 0;
    assert_eq!(unsafe { evk_is_evar(e, h, 1e-9, &mut ok) }, EvkStatus::Ok);
    assert_eq!(ok, 1);
    assert_eq!(unsafe { evk_in_pi_phi(h, pi.as_ptr(), 3, 1e-9, &mut ok) }, EvkStatus::Ok);
    assert_eq!(ok, 1);

    let over = [1.5; 5];
    let mut e2 = ptr::null_mut();
    assert_eq!(unsafe { evk_evar_from_values(over.as_ptr(), 5, &mut e2) }, EvkStatus::Ok);
    assert_eq!(unsafe { evk_is_evar(e2, h, 1e-9, &mut ok) }, EvkStatus::Ok);
    assert_eq!(ok, 0);
    unsafe {
        evk_evar_free(e2);
        evk_evar_free(e);
        evk_hypothesis_free(h);
        evk_hypothesis_free(ptr::null_mut());
    }
}

#[test]
fn hypothesis_from_json() {
    let text = CString::new(r#"{"grid": [0, 1], "constraints": [{"values": [-1, 0]}]}"#).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { evk_hypothesis_from_json(text.as_ptr(), &mut h) }, EvkStatus::Ok);
    unsafe { evk_hypothesis_free(h) };
    let bad = CString::new(
        r#"{"grid": {"start": 0, "stop": 1, "step": -1}, "constraints": {"kind": "mean_var", "params": {"sigma": 1}}}"#,
    )
    .unwrap();
    assert_eq!(unsafe { evk_hypothesis_from_json(bad.as_ptr(), &mut h) }, EvkStatus::InvalidInput);
    assert!(last_error().contains("bad range"), "{}", last_error());
}

#[test]
fn errors_are_reported() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { evk_hypothesis_from_json(ptr::null(), &mut h) }, EvkStatus::NullPointer);
    assert!(last_error().contains("null"));
    let bytes = [0xffu8, 0];
    assert_eq!(
        unsafe { evk_hypothesis_from_json(bytes.as_ptr().cast(), &mut h) },
        EvkStatus::InvalidUtf8
    );
    let mut v = 0.0;
    let psi = CString::new(r#"{"kind": "gaussian", "params": {"sigma": -1}}"#).unwrap();
    assert_eq!(unsafe { evk_psi_star(psi.as_ptr(), 1.0, &mut v) }, EvkStatus::InvalidInput);
    let psi = CString::new(r#"{"kind": "gaussian", "params": {"sigma": 1}}"#).unwrap();
    assert_eq!(unsafe { evk_psi_star(psi.as_ptr(), 2.0, &mut v) }, EvkStatus::Ok);
    assert_eq!(v, 2.0);
    assert_eq!(last_error(), "");
}

#[test]
fn run_json_matches_cli() {
    let cfg = CString::new(
        r#"{"schema": "evarkit/1", "command": "etest", "alpha": 0.4,
            "constraints": {"kind": "bounded_mean", "params": {"m": 0.5}},
            "candidate": {"pi": [2]}}"#,
    )
    .unwrap();
    let csv = CString::new("0.9\n0.9\n").unwrap();
    let mut report = ptr::null_mut();
    let mut code = -1;
    let s = unsafe { evk_run_json(cfg.as_ptr(), csv.as_ptr(), &mut report, &mut code) };
    assert_eq!(s, EvkStatus::Ok, "{}", last_error());
    assert_eq!(code, 0);
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { evk_string_free(report) };
    assert!(text.contains(r#""reject":true"#), "{text}");
    assert!(text.contains("3.2400000000000002e0"), "{text}");
}
