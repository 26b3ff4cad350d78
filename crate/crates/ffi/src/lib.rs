//! C ABI for the diffext map library.
//!
//! Maps and reports are opaque handles owned by the caller and released with
//! the matching `_free` function. Every fallible call returns a
//! [`DiffextStatus`]; on failure the message is available from
//! [`diffext_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use diffext::cli::{
    build_map, exit_code, parse_scenario, report_json, run_scenario, RunOptions, EXIT_SCHEMA,
};
use diffext::geom::Vector;
use diffext::maps::SmoothMap;
use diffext::verify::VerificationReport;
use diffext::Error;

/// Result of a call. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffextStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed scenario or map description.
    Schema = 3,
    /// The construction pipeline failed.
    Pipeline = 4,
    /// Buffer length does not match the map's dimension.
    Dimension = 5,
    /// Evaluation, differentiation or inversion failed at the given point.
    Evaluation = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

/// A diffeomorphism of ℝⁿ.
pub struct DiffextMap {
    map: Arc<SmoothMap>,
}

/// A verification report with its serialized form.
pub struct DiffextReport {
    report: VerificationReport,
    json: CString,
    exit: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DiffextStatus, msg: impl Into<String>) -> DiffextStatus {
    set_error(msg);
    status
}

fn pipeline_status(e: &Error) -> DiffextStatus {
    if exit_code(e) == EXIT_SCHEMA {
        DiffextStatus::Schema
    } else {
        DiffextStatus::Pipeline
    }
}

/// Run `f`, turning a panic into [`DiffextStatus::Panic`].
fn guard(f: impl FnOnce() -> DiffextStatus) -> DiffextStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(DiffextStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, DiffextStatus> {
    if s.is_null() {
        return Err(fail(DiffextStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(DiffextStatus::InvalidUtf8, e.to_string()))
}

/// # Safety
/// `m` must be null or a handle from this library.
unsafe fn read_map<'a>(m: *const DiffextMap) -> Result<&'a DiffextMap, DiffextStatus> {
    m.as_ref()
        .ok_or_else(|| fail(DiffextStatus::NullPointer, "map handle is null"))
}

/// # Safety
/// `p` must be null or point to `n` readable doubles.
unsafe fn read_point(p: *const f64, n: usize, dim: usize) -> Result<Vector, DiffextStatus> {
    if p.is_null() {
        return Err(fail(DiffextStatus::NullPointer, "point is null"));
    }
    if n != dim {
        return Err(fail(
            DiffextStatus::Dimension,
            format!("point has length {n}, map has dimension {dim}"),
        ));
    }
    Ok(Vector::from_slice(std::slice::from_raw_parts(p, n)))
}

/// # Safety
/// `out` must be null or point to `v.dim()` writable doubles.
unsafe fn write_point(v: &Vector, out: *mut f64) -> Result<(), DiffextStatus> {
    if out.is_null() {
        return Err(fail(DiffextStatus::NullPointer, "output buffer is null"));
    }
    std::ptr::copy_nonoverlapping(v.as_slice().as_ptr(), out, v.dim());
    Ok(())
}

fn status_of(r: Result<(), DiffextStatus>) -> DiffextStatus {
    r.err().unwrap_or(DiffextStatus::Ok)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn diffext_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn diffext_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a map from its JSON tree (as found under `parameters.map` in a report).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_from_json(
    json: *const c_char,
    out: *mut *mut DiffextMap,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            if out.is_null() {
                return Err(fail(DiffextStatus::NullPointer, "output handle is null"));
            }
            let text = read_str(json)?;
            let map: SmoothMap = serde_json::from_str(text)
                .map_err(|e| fail(DiffextStatus::Schema, format!("map: {e}")))?;
            *out = Box::into_raw(Box::new(DiffextMap { map: Arc::new(map) }));
            Ok(())
        })())
    })
}

/// Serialize a map to JSON. Release the string with [`diffext_string_free`].
/// Returns null on failure.
///
/// # Safety
/// `map` must be a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_to_json(map: *const DiffextMap) -> *mut c_char {
    let mut out = std::ptr::null_mut();
    guard(|| {
        status_of((|| {
            let m = read_map(map)?;
            let text = serde_json::to_string(&*m.map)
                .map_err(|e| fail(DiffextStatus::Schema, e.to_string()))?;
            out = CString::new(text)
                .map_err(|e| fail(DiffextStatus::Schema, e.to_string()))?
                .into_raw();
            Ok(())
        })())
    });
    out
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run a scenario's construction and return the resulting map, without
/// verification.
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn diffext_scenario_build(
    scenario_json: *const c_char,
    out: *mut *mut DiffextMap,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            if out.is_null() {
                return Err(fail(DiffextStatus::NullPointer, "output handle is null"));
            }
            let text = read_str(scenario_json)?;
            let s = parse_scenario(text.as_bytes())
                .map_err(|e| fail(pipeline_status(&e), e.to_string()))?;
            let map = build_map(&s).map_err(|e| fail(pipeline_status(&e), e.to_string()))?;
            *out = Box::into_raw(Box::new(DiffextMap { map }));
            Ok(())
        })())
    })
}

/// Run a scenario and its verification suite. A pipeline failure still
/// produces a (partial) report; the status is then `Pipeline`.
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn diffext_scenario_run(
    scenario_json: *const c_char,
    out: *mut *mut DiffextReport,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            if out.is_null() {
                return Err(fail(DiffextStatus::NullPointer, "output handle is null"));
            }
            let text = read_str(scenario_json)?;
            let s = parse_scenario(text.as_bytes())
                .map_err(|e| fail(pipeline_status(&e), e.to_string()))?;
            let outcome = run_scenario(&s, &RunOptions::default())
                .map_err(|e| fail(pipeline_status(&e), e.to_string()))?;
            let json = CString::new(report_json(&outcome.report)).expect("JSON has no NUL bytes");
            let error = outcome.report.pipeline_error.clone();
            *out = Box::into_raw(Box::new(DiffextReport {
                report: outcome.report,
                json,
                exit: outcome.exit,
            }));
            match error {
                Some(e) => Err(fail(DiffextStatus::Pipeline, e)),
                None => Ok(()),
            }
        })())
    })
}

/// 1 when every check passed, 0 otherwise (including a null handle).
///
/// # Safety
/// `report` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_report_passed(report: *const DiffextReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.report.verdict))
}

/// Exit status the command-line tool would use for this report.
///
/// # Safety
/// `report` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_report_exit_code(report: *const DiffextReport) -> u8 {
    report.as_ref().map_or(u8::MAX, |r| r.exit)
}

/// Number of checks in the report.
///
/// # Safety
/// `report` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_report_check_count(report: *const DiffextReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.checks.len())
}

/// The report as JSON, owned by the report handle.
///
/// # Safety
/// `report` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_report_json(report: *const DiffextReport) -> *const c_char {
    report
        .as_ref()
        .map_or(std::ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `report` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn diffext_report_free(report: *mut DiffextReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Dimension of the map, or 0 for a null handle.
///
/// # Safety
/// `map` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_dim(map: *const DiffextMap) -> usize {
    map.as_ref().map_or(0, |m| m.map.dim)
}

/// `y = F(x)` for `x`, `y` of length `n`.
///
/// # Safety
/// `map` must be a handle from this library; `x` and `y` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_eval(
    map: *const DiffextMap,
    x: *const f64,
    n: usize,
    y: *mut f64,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            let m = read_map(map)?;
            let x = read_point(x, n, m.map.dim)?;
            let v = m
                .map
                .eval(&x)
                .map_err(|e| fail(DiffextStatus::Evaluation, e.to_string()))?;
            write_point(&v, y)
        })())
    })
}

/// `y = F(x)` and the Jacobian `DF(x)` in row-major order (`n·n` doubles).
/// `y` may be null.
///
/// # Safety
/// `map` must be a handle from this library; `x` must hold `n` doubles, `y`
/// (if not null) `n` doubles and `jac` `n·n` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_jacobian(
    map: *const DiffextMap,
    x: *const f64,
    n: usize,
    y: *mut f64,
    jac: *mut f64,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            let m = read_map(map)?;
            let x = read_point(x, n, m.map.dim)?;
            if jac.is_null() {
                return Err(fail(DiffextStatus::NullPointer, "jacobian buffer is null"));
            }
            let (v, j) = m
                .map
                .eval_jac(&x)
                .map_err(|e| fail(DiffextStatus::Evaluation, e.to_string()))?;
            let flat: Vec<f64> = j.rows().into_iter().flatten().collect();
            std::ptr::copy_nonoverlapping(flat.as_ptr(), jac, n * n);
            if !y.is_null() {
                write_point(&v, y)?;
            }
            Ok(())
        })())
    })
}

/// `x = F⁻¹(y)` for `x`, `y` of length `n`.
///
/// # Safety
/// `map` must be a handle from this library; `y` and `x` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_inverse(
    map: *const DiffextMap,
    y: *const f64,
    n: usize,
    x: *mut f64,
) -> DiffextStatus {
    guard(|| {
        status_of((|| {
            let m = read_map(map)?;
            let y = read_point(y, n, m.map.dim)?;
            let v = m
                .map
                .inverse(&y)
                .map_err(|e| fail(DiffextStatus::Evaluation, e.to_string()))?;
            write_point(&v, x)
        })())
    })
}

/// # Safety
/// `map` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn diffext_map_free(map: *mut DiffextMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
