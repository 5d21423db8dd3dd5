//! C ABI over `evarkit`.
//!
//! Hypotheses and e-variables cross the boundary as opaque handles that
//! the caller frees. Every function returns an [`EvkStatus`]; on failure
//! [`evk_last_error_message`] describes the error for the calling thread.
//! Panics are caught at the boundary and reported as [`EvkStatus::Panic`].

use evarkit::adversary::{worst_case_expectation, Verdict};
use evarkit::cli::{run, ConstraintSpec, GridSpec, RunConfig};
use evarkit::finite::{builtin_constraints, candidate_evar, in_pi_phi, Builtin, PiVector};
use evarkit::measure::{EVariable, Hypothesis};
use evarkit::subpsi::{psi_star, PsiFunction};
use evarkit::Error;
use serde::Deserialize;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Numerical = 4,
    Panic = 5,
}

/// Verdict of [`evk_worst_case`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvkVerdict {
    EVariable = 0,
    Violated = 1,
    HypothesisEmpty = 2,
}

/// Opaque hypothesis handle.
pub struct EvkHypothesis(Hypothesis);

/// Opaque e-variable handle.
pub struct EvkEVariable(EVariable);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EvkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EvkStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            EvkStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_error("string is not valid UTF-8");
            EvkStatus::InvalidUtf8
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            if e.is_numerical() {
                EvkStatus::Numerical
            } else {
                EvkStatus::InvalidInput
            }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            EvkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8)
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn json<T: for<'de> Deserialize<'de>>(what: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure::Lib(Error::Input(format!("{what}: {e}"))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisJson {
    grid: GridSpec,
    constraints: ConstraintSpec,
}

/// Message for the last failed call on this thread; empty after a
/// success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn evk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a hypothesis from `{"grid": ..., "constraints": ...}`.
///
/// # Safety
/// `json_text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evk_hypothesis_from_json(
    json_text: *const c_char,
    out: *mut *mut EvkHypothesis,
) -> EvkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: HypothesisJson = json("hypothesis", str_arg(json_text, "json")?)?;
        let grid = spec.grid.build()?;
        let h = spec.constraints.build(&grid)?;
        *out = Box::into_raw(Box::new(EvkHypothesis(h)));
        Ok(())
    })
}

/// Built-in hypothesis (`{"kind": "mean_var", "params": {"sigma": 1}}`
/// and the like) on the scalar grid `xs[0..n]`.
///
/// # Safety
/// `kind_json` must be NUL-terminated, `xs` must hold `n` doubles and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evk_hypothesis_builtin(
    kind_json: *const c_char,
    xs: *const f64,
    n: usize,
    out: *mut *mut EvkHypothesis,
) -> EvkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind: Builtin = json("builtin", str_arg(kind_json, "kind_json")?)?;
        let grid = evarkit::measure::SampleGrid::scalar(slice_arg(xs, n, "xs")?.to_vec())?;
        *out = Box::into_raw(Box::new(EvkHypothesis(builtin_constraints(&kind, &grid)?)));
        Ok(())
    })
}

/// # Safety
/// `h` must come from this library and not be used afterwards; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn evk_hypothesis_free(h: *mut EvkHypothesis) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of grid points and of constraints.
///
/// # Safety
/// `h` must be a live handle; `len` and `dim` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn evk_hypothesis_shape(
    h: *const EvkHypothesis,
    len: *mut usize,
    dim: *mut usize,
) -> EvkStatus {
    guard(|| {
        let h = ref_arg(h, "h")?;
        *out_arg(len, "len")? = h.0.grid().len();
        *out_arg(dim, "dim")? = h.0.dim();
        Ok(())
    })
}

/// Raw e-variable from `n` nonnegative values.
///
/// # Safety
/// `values` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evk_evar_from_values(
    values: *const f64,
    n: usize,
    out: *mut *mut EvkEVariable,
) -> EvkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = EVariable::raw(slice_arg(values, n, "values")?.to_vec())?;
        *out = Box::into_raw(Box::new(EvkEVariable(e)));
        Ok(())
    })
}

/// `max(0, 1 + Σ πᵢ gᵢ)` on the hypothesis grid.
///
/// # Safety
/// `h` must be live, `pi` must hold `d` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evk_evar_from_pi(
    h: *const EvkHypothesis,
    pi: *const f64,
    d: usize,
    tol: f64,
    out: *mut *mut EvkEVariable,
) -> EvkStatus {
    guard(|| {
        let h = ref_arg(h, "h")?;
        let out = out_arg(out, "out")?;
        let pi = PiVector::new(slice_arg(pi, d, "pi")?.to_vec())?;
        *out = Box::into_raw(Box::new(EvkEVariable(candidate_evar(&pi, &h.0, tol)?)));
        Ok(())
    })
}

/// Number of values of `e`.
///
/// # Safety
/// `e` must be live and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn evk_evar_len(e: *const EvkEVariable, len: *mut usize) -> EvkStatus {
    guard(|| {
        *out_arg(len, "len")? = ref_arg(e, "e")?.0.len();
        Ok(())
    })
}

/// Copies the values of `e` into `buf`, which must have room for exactly
/// [`evk_evar_len`] doubles.
///
/// # Safety
/// `e` must be live and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn evk_evar_values(
    e: *const EvkEVariable,
    buf: *mut f64,
    cap: usize,
) -> EvkStatus {
    guard(|| {
        let v = ref_arg(e, "e")?.0.values();
        if cap != v.len() {
            return Err(Error::Alignment {
                what: "buffer",
                got: cap,
                expected: v.len(),
            }
            .into());
        }
        if !v.is_empty() {
            if buf.is_null() {
                return Err(Failure::Null("buf"));
            }
            ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        }
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not be used afterwards; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn evk_evar_free(e: *mut EvkEVariable) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Worst-case mean of `e` over the discretized hypothesis. `value` is NaN
/// when the hypothesis is empty.
///
/// # Safety
/// Handles must be live; `value` and `verdict` valid.
#[no_mangle]
pub unsafe extern "C" fn evk_worst_case(
    e: *const EvkEVariable,
    h: *const EvkHypothesis,
    tol: f64,
    value: *mut f64,
    verdict: *mut EvkVerdict,
) -> EvkStatus {
    guard(|| {
        let r = worst_case_expectation(&ref_arg(e, "e")?.0, &ref_arg(h, "h")?.0, tol)?;
        *out_arg(value, "value")? = r.worst_value.unwrap_or(f64::NAN);
        *out_arg(verdict, "verdict")? = match r.verdict {
            Verdict::EVariable => EvkVerdict::EVariable,
            Verdict::Violated => EvkVerdict::Violated,
            Verdict::HypothesisEmpty => EvkVerdict::HypothesisEmpty,
        };
        Ok(())
    })
}

/// Writes 1 if `e` is an e-variable on the grid, else 0.
///
/// # Safety
/// Handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn evk_is_evar(
    e: *const EvkEVariable,
    h: *const EvkHypothesis,
    tol: f64,
    out: *mut c_int,
) -> EvkStatus {
    guard(|| {
        let r = worst_case_expectation(&ref_arg(e, "e")?.0, &ref_arg(h, "h")?.0, tol)?;
        *out_arg(out, "out")? = c_int::from(r.passes());
        Ok(())
    })
}

/// Writes 1 if `1 + Σ πᵢ gᵢ ≥ −tol` at every charged grid point, else 0.
///
/// # Safety
/// `h` must be live, `pi` must hold `d` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evk_in_pi_phi(
    h: *const EvkHypothesis,
    pi: *const f64,
    d: usize,
    tol: f64,
    out: *mut c_int,
) -> EvkStatus {
    guard(|| {
        let h = ref_arg(h, "h")?;
        let pi = PiVector::new(slice_arg(pi, d, "pi")?.to_vec())?;
        *out_arg(out, "out")? = c_int::from(in_pi_phi(&pi, &h.0, tol)?);
        Ok(())
    })
}

/// Convex conjugate `ψ*(x)` for a ψ given as JSON, e.g.
/// `{"kind": "gaussian", "params": {"sigma": 1}}`.
///
/// # Safety
/// `psi_json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn evk_psi_star(psi_json: *const c_char, x: f64, out: *mut f64) -> EvkStatus {
    guard(|| {
        let psi: PsiFunction = json("psi", str_arg(psi_json, "psi_json")?)?;
        psi.validate()?;
        *out_arg(out, "out")? = psi_star(&psi, x);
        Ok(())
    })
}

/// Runs a full `evarkit/1` config, as the command-line tool does. `csv`
/// may be null. On success `report` receives a string to release with
/// [`evk_string_free`] and `exit_code` the tool's exit code.
///
/// # Safety
/// `config_json` (and `csv` unless null) must be NUL-terminated; `report`
/// and `exit_code` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evk_run_json(
    config_json: *const c_char,
    csv: *const c_char,
    report: *mut *mut c_char,
    exit_code: *mut c_int,
) -> EvkStatus {
    guard(|| {
        let report = out_arg(report, "report")?;
        let exit_code = out_arg(exit_code, "exit_code")?;
        let cfg = RunConfig::from_json(str_arg(config_json, "config_json")?)?;
        let data = if csv.is_null() {
            None
        } else {
            Some(str_arg(csv, "csv")?)
        };
        let out = run(&cfg, data)?;
        *report = CString::new(out.report.to_json())
            .map_err(|_| Error::Input("report contains NUL".into()))?
            .into_raw();
        *exit_code = out.exit_code;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn evk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
