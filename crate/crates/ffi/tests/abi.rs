use std::ffi::{CStr, CString};
use std::ptr;

use diffext_ffi::*;

const EXTEND: &str = r#"{
  "version": "1",
  "dimension": 2,
  "command": "extend",
  "maps": { "turn": { "builtin": { "family": "rotation", "angle": 0.5, "center": [0, 0] } } },
  "balls": { "unit": { "map": "turn", "center": [0, 0], "radius": 1, "margin": 0.5 } },
  "input": "unit",
  "eps": 0.5,
  "suite": "quick"
}"#;

fn last_error() -> String {
    let p = diffext_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn build(json: &str) -> *mut DiffextMap {
    let text = CString::new(json).unwrap();
    let mut map = ptr::null_mut();
    let status = unsafe { diffext_scenario_build(text.as_ptr(), &mut map) };
    assert_eq!(status, DiffextStatus::Ok, "{}", last_error());
    map
}

#[test]
fn extension_evaluates_and_inverts() {
    let map = build(EXTEND);
    unsafe {
        assert_eq!(diffext_map_dim(map), 2);
        let x = [0.3, 0.2];
        let mut y = [0.0; 2];
        assert_eq!(
            diffext_map_eval(map, x.as_ptr(), 2, y.as_mut_ptr()),
            DiffextStatus::Ok
        );
        let (s, c) = 0.5f64.sin_cos();
        assert!((y[0] - (c * 0.3 - s * 0.2)).abs() < 1e-12);
        assert!((y[1] - (s * 0.3 + c * 0.2)).abs() < 1e-12);

        let mut back = [0.0; 2];
        assert_eq!(
            diffext_map_inverse(map, y.as_ptr(), 2, back.as_mut_ptr()),
            DiffextStatus::Ok
        );
        assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10);

        let far = [40.0, -3.0];
        assert_eq!(
            diffext_map_eval(map, far.as_ptr(), 2, y.as_mut_ptr()),
            DiffextStatus::Ok
        );
        assert_eq!(y, far);

        let mut jac = [0.0; 4];
        assert_eq!(
            diffext_map_jacobian(map, x.as_ptr(), 2, ptr::null_mut(), jac.as_mut_ptr()),
            DiffextStatus::Ok
        );
        assert!((jac[0] - c).abs() < 1e-12 && (jac[1] + s).abs() < 1e-12);
        diffext_map_free(map);
    }
}

#[test]
fn map_json_round_trips() {
    let map = build(EXTEND);
    unsafe {
        let json = diffext_map_to_json(map);
        assert!(!json.is_null());
        let mut copy = ptr::null_mut();
        assert_eq!(diffext_map_from_json(json, &mut copy), DiffextStatus::Ok);
        let x = [0.7, -0.9];
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        diffext_map_eval(map, x.as_ptr(), 2, a.as_mut_ptr());
        diffext_map_eval(copy, x.as_ptr(), 2, b.as_mut_ptr());
        assert_eq!(a, b);
        diffext_string_free(json);
        diffext_map_free(copy);
        diffext_map_free(map);
    }
}

#[test]
fn run_produces_passing_report() {
    let text = CString::new(EXTEND).unwrap();
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(
            diffext_scenario_run(text.as_ptr(), &mut report),
            DiffextStatus::Ok
        );
        assert_eq!(diffext_report_passed(report), 1);
        assert_eq!(diffext_report_exit_code(report), 0);
        assert!(diffext_report_check_count(report) >= 5);
        let json = CStr::from_ptr(diffext_report_json(report))
            .to_str()
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["verdict"], true);
        diffext_report_free(report);
    }
}

#[test]
fn errors_are_reported() {
    let map = build(EXTEND);
    unsafe {
        let x = [0.0; 3];
        let mut y = [0.0; 3];
        assert_eq!(
            diffext_map_eval(map, x.as_ptr(), 3, y.as_mut_ptr()),
            DiffextStatus::Dimension
        );
        assert!(last_error().contains("dimension 2"));
        assert_eq!(
            diffext_map_eval(ptr::null(), x.as_ptr(), 2, y.as_mut_ptr()),
            DiffextStatus::NullPointer
        );
        diffext_map_free(map);

        let bad =
            CString::new(r#"{"version": "1", "dimension": 2, "command": "extend", "bogus": 1}"#)
                .unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(
            diffext_scenario_build(bad.as_ptr(), &mut out),
            DiffextStatus::Schema
        );
        assert!(out.is_null());
        assert!(last_error().contains("bogus"));

        let reversing = EXTEND.replace(
            r#""family": "rotation", "angle": 0.5, "center": [0, 0]"#,
            r#""family": "affine", "matrix": [[-1, 0], [0, 1]], "offset": [0, 0]"#,
        );
        let text = CString::new(reversing).unwrap();
        assert_eq!(
            diffext_scenario_build(text.as_ptr(), &mut out),
            DiffextStatus::Pipeline
        );

        let mut report = ptr::null_mut();
        assert_eq!(
            diffext_scenario_run(text.as_ptr(), &mut report),
            DiffextStatus::Pipeline
        );
        assert!(!report.is_null());
        assert_eq!(diffext_report_passed(report), 0);
        assert_eq!(diffext_report_exit_code(report), 3);
        diffext_report_free(report);

        let garbage = CString::new("[1, 2").unwrap();
        assert_eq!(
            diffext_map_from_json(garbage.as_ptr(), &mut out),
            DiffextStatus::Schema
        );
        diffext_map_free(ptr::null_mut());
        diffext_report_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(diffext_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// The generated header parses as C and declares every exported symbol.
#[test]
fn header_is_valid_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/diffext.h"))
        .expect("header generated by build.rs");
    for sym in [
        "diffext_last_error",
        "diffext_scenario_build",
        "diffext_scenario_run",
        "diffext_map_eval",
        "diffext_map_jacobian",
        "diffext_map_inverse",
        "diffext_map_free",
        "diffext_report_free",
        "DIFFEXT_STATUS_OK",
        "typedef struct DiffextMap DiffextMap",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(dir.join("include/diffext.h"))
        .status()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
