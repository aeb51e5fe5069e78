//! The command-line tool: exit codes, outputs and the user catalog.

use std::f64::consts::PI;
use std::fs;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bundlekit"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<(f64, f64)>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap()))
                .collect()
        })
        .collect()
}

#[test]
fn validate_exit_codes() {
    assert_eq!(run(&["validate", "catalog:mobius"]).0, 0);
    assert_eq!(run(&["validate", "catalog:monopole--1"]).0, 0);
    let (code, out, _) = run(&["validate", "catalog:broken"]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL  cocycle.triple"), "{out}");
    // the offending triple of charts is named
    assert!(out.contains("worst at aa,ab,"), "{out}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["validate", "/no/such/spec.json"]).0, 2);
    assert_eq!(run(&["validate", "catalog:nonexistent"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["transport", "catalog:mobius", "--curve", "missing"]).0, 2);
    assert_eq!(run(&["transport", "catalog:tangent-sphere", "--curve", "latitude-60", "--step", "0"]).0, 2);
}

#[test]
fn schema_violation_exits_two_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut v = json(&run(&["catalog", "show", "mobius"]).1);
    v["unexpected"] = Value::Bool(true);
    fs::write(&path, v.to_string()).unwrap();
    let (code, _, err) = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("unexpected"), "{err}");
}

#[test]
fn spec_files_and_catalog_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.json");
    fs::write(&path, run(&["catalog", "show", "tangent-sphere"]).1).unwrap();
    let a = run(&["report", path.to_str().unwrap()]);
    let b = run(&["report", "catalog:tangent-sphere"]);
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
}

#[test]
fn transport_reports_the_latitude_rotation() {
    let (code, out, _) = run(&["transport", "catalog:tangent-sphere", "--curve", "latitude-60"]);
    assert_eq!(code, 0);
    let v = json(&out);
    let m = matrix(&v["value"]);
    let angle = (m[1][0].0 - m[0][1].0).atan2(m[0][0].0 + m[1][1].0);
    assert!((angle.abs() - PI).abs() < 1e-6);
    assert_eq!(v["steps"], 1000);
}

#[test]
fn transport_of_a_vector() {
    let (code, out, _) = run(&["transport", "catalog:tangent-sphere", "--curve", "latitude-90", "--v0", "1,0"]);
    assert_eq!(code, 0);
    let m = matrix(&json(&out)["value"]);
    assert_eq!(m.len(), 2);
    assert_eq!(m[0].len(), 1);
    // a half turn at the equator: 2π(1 − cos π/2) = 2π
    assert!((m[0][0].0 - 1.0).abs() < 1e-6 && m[1][0].0.abs() < 1e-6);
}

#[test]
fn halving_the_step_stays_within_the_error_estimate() {
    let at = |step: &str| {
        let (code, out, _) = run(&["transport", "catalog:monopole-2", "--curve", "equator", "--step", step]);
        assert_eq!(code, 0);
        json(&out)
    };
    let coarse = at("2e-3");
    let fine = at("1e-3");
    let (a, b) = (matrix(&coarse["value"]), matrix(&fine["value"]));
    let gap = ((a[0][0].0 - b[0][0].0).powi(2) + (a[0][0].1 - b[0][0].1).powi(2)).sqrt();
    let estimate = coarse["errorEstimate"].as_f64().unwrap();
    assert!(gap <= 16.0 * estimate + 1e-13, "gap {gap:e}, estimate {estimate:e}");
}

#[test]
fn flat_transport_without_connection() {
    let (code, out, _) = run(&["transport", "catalog:mobius", "--curve", "around"]);
    assert_eq!(code, 0);
    assert_eq!(matrix(&json(&out)["value"])[0][0], (-1.0, 0.0));
}

#[test]
fn chern_of_monopole_two() {
    let (code, out, _) = run(&["chern", "catalog:monopole-2", "--resolution", "64"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!((v["raw"].as_f64().unwrap() - 2.0).abs() < 1e-3);
    assert_eq!(v["nearest"], 2);
    assert_eq!(run(&["chern", "catalog:tangent-sphere"]).0, 2);
}

#[test]
fn report_on_the_round_sphere() {
    let (code, out, _) = run(&["report", "catalog:tangent-sphere"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["status"], "PASS");
    let total = v["totalCurvature"]["value"].as_f64().unwrap();
    assert!((total - 4.0 * PI).abs() < 1e-3);
    let checks = v["checks"].as_array().unwrap();
    for name in ["torsion.magnitude", "bianchi.first", "bianchi.second", "connection.overlap"] {
        assert!(checks.iter().any(|c| c["name"] == name), "missing {name}");
    }
}

#[test]
fn report_is_byte_identical_across_thread_counts() {
    let one = bin().args(["--threads", "1", "report", "catalog:torus-u2"]).output().unwrap();
    let many = bin().args(["--threads", "6", "report", "catalog:torus-u2"]).output().unwrap();
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let (code, _, _) = run(&["field", "catalog:tangent-sphere", "--kind", "k", "--resolution", "8", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("chart,u,v,value"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let (u, v): (f64, f64) = (cols[1].parse().unwrap(), cols[2].parse().unwrap());
        let d = 1.0 + u * u + v * v;
        assert!((cols[3].parse::<f64>().unwrap() - 4.0 / (d * d)).abs() < 1e-12);
    }
}

#[test]
fn catalog_listing_and_user_directory() {
    let (code, out, _) = run(&["catalog", "list"]);
    assert_eq!(code, 0);
    for name in ["mobius", "tangent-sphere", "monopole-N", "sphere", "torus"] {
        assert!(out.contains(name), "missing {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let mut v = json(&run(&["catalog", "show", "mobius"]).1);
    v["name"] = Value::String("my-strip".into());
    fs::write(dir.path().join("my-strip.json"), v.to_string()).unwrap();
    let listed = bin().env("BUNDLEKIT_CATALOG_DIR", dir.path()).args(["catalog", "list"]).output().unwrap();
    assert!(String::from_utf8(listed.stdout).unwrap().contains("my-strip"));
    let status = bin()
        .env("BUNDLEKIT_CATALOG_DIR", dir.path())
        .args(["validate", "catalog:my-strip"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn in_process_entry_point_matches_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let args = ["bundlekit", "chern", "catalog:monopole--1", "--resolution", "16"].map(std::ffi::OsString::from);
    let code = bundlekit::cli::run(args, &mut out, &mut err);
    let (bin_code, bin_out, _) = run(&["chern", "catalog:monopole--1", "--resolution", "16"]);
    assert_eq!(code, bin_code);
    assert_eq!(String::from_utf8(out).unwrap(), bin_out);
}

#[test]
fn flat_spec_transports_to_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.json");
    let mut v = json(&run(&["catalog", "show", "torus-u2"]).1);
    v.as_object_mut().unwrap().remove("gaugeField");
    fs::write(&path, v.to_string()).unwrap();
    let (code, out, _) = run(&["transport", path.to_str().unwrap(), "--curve", "meridian"]);
    assert_eq!(code, 0);
    let m = matrix(&json(&out)["value"]);
    assert_eq!(m, vec![vec![(1.0, 0.0), (0.0, 0.0)], vec![(0.0, 0.0), (1.0, 0.0)]]);
}

#[test]
fn finite_difference_check_of_d_on_request() {
    let plain = run(&["validate", "catalog:asymmetric", "--json"]).1;
    assert!(!plain.contains("forms.d_cross_check"));
    for spec in ["catalog:tangent-sphere", "catalog:asymmetric", "catalog:monopole-1"] {
        let (code, out, _) = run(&["validate", spec, "--verify-d", "--samples", "32", "--json"]);
        assert_eq!(code, 0, "{spec}");
        let v = json(&out);
        let check = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "forms.d_cross_check").unwrap();
        assert_eq!(check["status"], "PASS");
    }
}
