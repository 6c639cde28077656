//! C ABI for the transmission-problem laboratory: opaque handles over
//! problems and solved fields, an experiment runner working on JSON strings,
//! and explicit status codes. The generated header lives in
//! `include/translab.h`.
//!
//! Ownership rules: every `*_new`/`*_from_json`/`*_solve` output is owned by
//! the caller and released with the matching `*_free`; strings returned by
//! this library are released with `translab_string_free`. Pointer arguments
//! must be valid or null; null and non-UTF-8 inputs are rejected with a
//! status code rather than undefined behavior.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use translab::experiment::{run_experiment, ExperimentConfig};
use translab::field::Field;
use translab::solver::{solve, SolveReport, TransmissionProblem};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TranslabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    RuntimeError = 3,
    /// The experiment ran but at least one asserted inequality failed.
    AssertionFailed = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

/// Opaque problem handle.
pub struct TranslabProblem {
    inner: TransmissionProblem,
}

/// Opaque solved-field handle (the space-time field plus its solve report).
pub struct TranslabField {
    field: Field,
    report: SolveReport,
}

/// Grid metadata of a solved field.
#[repr(C)]
pub struct TranslabGridInfo {
    pub n: usize,
    pub r: f64,
    pub h: f64,
    pub dt: f64,
    /// Nodes per spatial axis; nx1 is 1 when n = 1.
    pub nx0: usize,
    pub nx1: usize,
    /// Stored time levels including the bottom slice.
    pub nt: usize,
}

fn guard<F: FnOnce() -> TranslabStatus>(body: F) -> TranslabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            TranslabStatus::RuntimeError
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().ok()
}

fn export_string(s: String) -> *mut c_char {
    let sanitized: String = s.chars().filter(|c| *c != '\0').collect();
    CString::new(sanitized).unwrap().into_raw()
}

/// Library version as a static string; never freed.
#[no_mangle]
pub extern "C" fn translab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message for this thread into `buf` (truncating) and
/// returns the full message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn translab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len() - 1
    })
}

/// Builds a problem from the JSON problem description used by the CLI
/// (grid, F_plus/F_minus, f, g, psi, phi).
#[no_mangle]
pub unsafe extern "C" fn translab_problem_from_json(
    json: *const c_char,
    out: *mut *mut TranslabProblem,
) -> TranslabStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return TranslabStatus::NullArgument;
        }
        let Some(text) = (unsafe { cstr_arg(json) }) else {
            set_error("problem JSON must be valid UTF-8 and non-null");
            return TranslabStatus::NullArgument;
        };
        let cfg: translab::experiment::ProblemConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&format!("problem JSON: {e}"));
                return TranslabStatus::InvalidArgument;
            }
        };
        match translab::experiment::build_problem_config(&cfg) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(TranslabProblem { inner })) };
                TranslabStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TranslabStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn translab_problem_free(p: *mut TranslabProblem) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Marches the problem from the bottom slice to the top slice.
#[no_mangle]
pub unsafe extern "C" fn translab_solve(
    p: *const TranslabProblem,
    out: *mut *mut TranslabField,
) -> TranslabStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            set_error("null argument");
            return TranslabStatus::NullArgument;
        }
        let problem = unsafe { &(*p).inner };
        match solve(problem) {
            Ok((field, report)) => {
                unsafe { *out = Box::into_raw(Box::new(TranslabField { field, report })) };
                TranslabStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TranslabStatus::RuntimeError
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn translab_field_free(f: *mut TranslabField) {
    if !f.is_null() {
        drop(unsafe { Box::from_raw(f) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn translab_field_grid(
    f: *const TranslabField,
    out: *mut TranslabGridInfo,
) -> TranslabStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return TranslabStatus::NullArgument;
        }
        let g = unsafe { (*f).field.grid() };
        unsafe {
            *out = TranslabGridInfo {
                n: g.n(),
                r: g.r(),
                h: g.h(),
                dt: g.dt(),
                nx0: g.nx()[0],
                nx1: g.nx()[1],
                nt: g.nt(),
            };
        }
        TranslabStatus::Ok
    })
}

/// Value at spatial index (i0, i1) and time level k; i1 is ignored for
/// n = 1. Fails on masked nodes and out-of-range indices.
#[no_mangle]
pub unsafe extern "C" fn translab_field_value(
    f: *const TranslabField,
    i0: usize,
    i1: usize,
    k: usize,
    out: *mut f64,
) -> TranslabStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return TranslabStatus::NullArgument;
        }
        let field = unsafe { &(*f).field };
        let g = field.grid();
        let i1 = if g.n() == 1 { 0 } else { i1 };
        if i0 >= g.nx()[0] || i1 >= g.nx()[1] || k >= g.nt() {
            set_error("index out of range");
            return TranslabStatus::InvalidArgument;
        }
        let s = g.space_index([i0, i1]);
        if !g.in_ball(s) {
            set_error("node is outside the ball mask");
            return TranslabStatus::InvalidArgument;
        }
        unsafe { *out = field.get(s, k) };
        TranslabStatus::Ok
    })
}

/// Max over stored levels of the local jump-equation residual.
#[no_mangle]
pub unsafe extern "C" fn translab_field_interface_residual(
    f: *const TranslabField,
    out: *mut f64,
) -> TranslabStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return TranslabStatus::NullArgument;
        }
        unsafe { *out = (*f).report.max_interface_residual };
        TranslabStatus::Ok
    })
}

/// Serializes the field in the flat CSV schema `x1[,x2],t,side,value`.
/// The returned string is owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn translab_field_to_csv(
    f: *const TranslabField,
    out: *mut *mut c_char,
) -> TranslabStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return TranslabStatus::NullArgument;
        }
        let csv = unsafe { (*f).field.to_csv(None) };
        unsafe { *out = export_string(csv) };
        TranslabStatus::Ok
    })
}

/// Runs a full experiment config (same schema as the CLI) and hands back the
/// deterministic report JSON. `AssertionFailed` still produces the report.
#[no_mangle]
pub unsafe extern "C" fn translab_experiment_run(
    config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> TranslabStatus {
    guard(|| {
        if out_report_json.is_null() {
            set_error("null output pointer");
            return TranslabStatus::NullArgument;
        }
        let Some(text) = (unsafe { cstr_arg(config_json) }) else {
            set_error("config JSON must be valid UTF-8 and non-null");
            return TranslabStatus::NullArgument;
        };
        let cfg = match ExperimentConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return TranslabStatus::InvalidArgument;
            }
        };
        match run_experiment(&cfg, 0) {
            Ok(outcome) => {
                let json = serde_json::to_string_pretty(&outcome.report).unwrap();
                unsafe { *out_report_json = export_string(json) };
                if outcome.passed {
                    TranslabStatus::Ok
                } else {
                    set_error("one or more asserted inequalities failed");
                    TranslabStatus::AssertionFailed
                }
            }
            Err(e) => {
                set_error(&e.to_string());
                TranslabStatus::RuntimeError
            }
        }
    })
}

/// The built-in expression and family catalog as text.
#[no_mangle]
pub unsafe extern "C" fn translab_catalog(out: *mut *mut c_char) -> TranslabStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return TranslabStatus::NullArgument;
        }
        unsafe { *out = export_string(translab::catalog::render_catalog()) };
        TranslabStatus::Ok
    })
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn translab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn problem_roundtrip_and_solve() {
        let json = cstring(
            r#"{"grid": {"n": 1, "r": 1.0, "h": 0.125}, "g": 2.0, "phi": "kink"}"#,
        );
        let mut problem: *mut TranslabProblem = ptr::null_mut();
        let st = unsafe { translab_problem_from_json(json.as_ptr(), &mut problem) };
        assert_eq!(st, TranslabStatus::Ok);
        let mut field: *mut TranslabField = ptr::null_mut();
        assert_eq!(unsafe { translab_solve(problem, &mut field) }, TranslabStatus::Ok);

        let mut info = TranslabGridInfo { n: 0, r: 0.0, h: 0.0, dt: 0.0, nx0: 0, nx1: 0, nt: 0 };
        assert_eq!(unsafe { translab_field_grid(field, &mut info) }, TranslabStatus::Ok);
        assert_eq!(info.n, 1);
        assert_eq!(info.nx0, 17);

        // the kink is a fixed point: value at the top-right corner is |x| = 1
        let mut v = 0.0f64;
        let st = unsafe { translab_field_value(field, info.nx0 - 1, 0, info.nt - 1, &mut v) };
        assert_eq!(st, TranslabStatus::Ok);
        assert!((v - 1.0).abs() < 1e-10);

        let mut res = -1.0f64;
        assert_eq!(
            unsafe { translab_field_interface_residual(field, &mut res) },
            TranslabStatus::Ok
        );
        assert!((0.0..1e-9).contains(&res));

        let mut csv: *mut c_char = ptr::null_mut();
        assert_eq!(unsafe { translab_field_to_csv(field, &mut csv) }, TranslabStatus::Ok);
        let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap();
        assert!(text.starts_with("x1,t,side,value"));
        unsafe { translab_string_free(csv) };

        unsafe {
            translab_field_free(field);
            translab_problem_free(problem);
        }
    }

    #[test]
    fn status_codes_and_errors() {
        let mut problem: *mut TranslabProblem = ptr::null_mut();
        assert_eq!(
            unsafe { translab_problem_from_json(ptr::null(), &mut problem) },
            TranslabStatus::NullArgument
        );
        let bad = cstring(r#"{"grid": {"n": 7, "r": 1.0, "h": 0.1}}"#);
        assert_eq!(
            unsafe { translab_problem_from_json(bad.as_ptr(), &mut problem) },
            TranslabStatus::InvalidArgument
        );
        let mut buf = [0 as c_char; 256];
        let n = unsafe { translab_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 0);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert!(msg.contains("1 or 2"), "{msg}");
    }

    #[test]
    fn experiment_passthrough() {
        let cfg = cstring(
            r#"{
                "name": "ffi-kink",
                "command": "solve",
                "problem": {"grid": {"n": 1, "r": 1.0, "h": 0.0625}, "g": 2.0, "phi": "kink"},
                "refinements": [0.0625],
                "params": {"expect": "kink", "tol": 1e-10}
            }"#,
        );
        let mut report: *mut c_char = ptr::null_mut();
        let st = unsafe { translab_experiment_run(cfg.as_ptr(), &mut report) };
        assert_eq!(st, TranslabStatus::Ok);
        let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(v["command"], "solve");
        assert!(v["assertions"][0]["passed"].as_bool().unwrap());
        unsafe { translab_string_free(report) };

        // assertion failure is distinguishable from runtime errors
        let failing = cstring(
            r#"{
                "name": "ffi-fail",
                "command": "solve",
                "problem": {"grid": {"n": 1, "r": 1.0, "h": 0.25}, "phi": "sine-mix"},
                "refinements": [0.25],
                "params": {"expect": "kink", "tol": 1e-10}
            }"#,
        );
        let mut report: *mut c_char = ptr::null_mut();
        let st = unsafe { translab_experiment_run(failing.as_ptr(), &mut report) };
        assert_eq!(st, TranslabStatus::AssertionFailed);
        unsafe { translab_string_free(report) };
    }

    #[test]
    fn catalog_and_version() {
        let mut s: *mut c_char = ptr::null_mut();
        assert_eq!(unsafe { translab_catalog(&mut s) }, TranslabStatus::Ok);
        let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap();
        assert!(text.contains("kink") && text.contains("bump"));
        unsafe { translab_string_free(s) };
        let v = unsafe { CStr::from_ptr(translab_version()) }.to_str().unwrap();
        assert!(!v.is_empty());
    }
}
