use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn preset(name: &str) -> String {
    presets().join(format!("{name}.json")).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refracted")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn roots_json() {
    let o = run(&["roots", "--q", "1", "--model", &preset("std-bm")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["phi"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    // ψ(θ) - δθ = θ² - θ/2 = 1
    let varphi = (0.5 + (0.25f64 + 4.0).sqrt()) / 2.0;
    assert!((v["varphi"].as_f64().unwrap() - varphi).abs() < 1e-14);
    for key in ["q", "phi", "varphi", "residuals"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_passes_on_presets() {
    for name in ["std-bm", "cl-exp"] {
        let o = run(&["verify", "--model", &preset(name)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(v["pass"], true);
    }
}

#[test]
fn bundled_preset_names_resolve() {
    let o = run(&["roots", "--model", "cl-exp"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn non_positive_delta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"sigma": 1.4142135623730951, "gamma": 0, "jumps": "none", "delta": 0, "b": 0}"#).unwrap();
    let o = run(&["resolvent", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("δ must be positive"), "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, "{\n  \"sigma\": 1,\n  \"gamma\": oops\n}").unwrap();
    let o = run(&["roots", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m.json:3:"), "{}", stderr(&o));
    let o = run(&["roots", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["roots", "--model", &preset("std-bm"), "--frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["integrate"]).status.code(), Some(64));
    assert_eq!(run(&["resolvent", "--model", &preset("std-bm"), "--format", "xml"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["resolvent", "--model", &preset("std-bm"), "--route", "sideways"]).status.code(), Some(1));
}

#[test]
fn resolvent_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["resolvent", "--model", &preset("cl-exp"), "--x", "1", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,density_scale,density_wh,gap"));
    assert_eq!(lines.count(), 241);
}

#[test]
fn resolvent_spot_value_and_summary() {
    let o = run(&[
        "resolvent", "--model", &preset("std-bm"), "--x", "-1", "--y-min", "1", "--y-max", "1.05", "--step", "0.05",
        "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["density_scale", "density_wh"] {
        assert!((v[key][0].as_f64().unwrap() - 0.057394).abs() < 1e-4);
    }
    assert!(v.get("route_gap").is_some() && v.get("normalization_defect").is_some());
    assert!(v.get("timings").is_none());
}

#[test]
fn csv_numbers_have_seventeen_digits() {
    let o = run(&["scale", "--model", &preset("std-bm"), "--lo", "1", "--hi", "1.5", "--step", "0.5"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,W,W_prime,backend,q,process_tag"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let w: f64 = row[1].parse().unwrap();
    assert!((w - 1f64.sinh()).abs() < 1e-14);
    let mantissa = row[1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(row[3], "closed-form");
    assert_eq!(row[5], "X");
}

#[test]
fn factors_leave_out_of_domain_cells_empty() {
    let o = run(&["factors", "--model", &preset("cl-exp"), "--lo", "-1", "--hi", "1", "--step", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["x", "F1", "F1_prime", "F2", "F2_prime", "f", "Kq_density"]);
    // x = -1: no F1; x = 0: F1 and F2 only plus K; x = 1: no F2, f
    assert!(rows[1][1].is_empty() && rows[1][2].is_empty() && !rows[1][3].is_empty() && !rows[1][5].is_empty());
    assert!(!rows[2][1].is_empty() && rows[2][2].is_empty() && !rows[2][3].is_empty() && rows[2][4].is_empty());
    assert!(rows[3][3].is_empty() && rows[3][5].is_empty() && !rows[3][6].is_empty());
}

#[test]
fn simulate_is_reproducible_and_compares() {
    let args = ["simulate", "--model", &preset("std-bm"), "--n", "4000", "--seed", "11", "--compare", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["n_total"], 4000);
    assert!(v["z_report"]["within_4"].as_f64().unwrap() >= 0.95);
}
