mod common;

use common::spec_path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subfinsler")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn distance_text_output() {
    let spec = spec_path("heisenberg.json");
    let o = run(&["distance", "--spec", &spec, "--from", "0,0,0", "--to", "0,0,0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "status"), "reached");
    let len: f64 = field(&text, "length").parse().unwrap();
    assert!((len - std::f64::consts::PI.sqrt()).abs() < 1e-6);
    assert!(field(&text, "p0").starts_with('['));
}

#[test]
fn distance_is_deterministic_and_thread_independent() {
    let spec = spec_path("heisenberg.json");
    let args = ["distance", "--spec", &spec, "--from", "0.1,-0.2,0", "--to", "-0.3,0.4,0.5", "--seed", "3", "--format", "json"];
    let a = run(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_subfinsler"))
        .args(args)
        .env(subfinsler::cli::THREADS_ENV, "2")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["status"], "reached");
}

#[test]
fn require_reached_exit_code() {
    let spec = spec_path("involutive.json");
    let base = ["distance", "--spec", &spec, "--from", "0,0,0", "--to", "0,0,1", "--starts", "8"];
    let o = run(&base);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "status"), "unreached");
    let mut strict = base.to_vec();
    strict.push("--require-reached");
    assert_eq!(run(&strict).status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"dim\": ").unwrap();
    let bad = bad.to_str().unwrap();
    let heis = spec_path("heisenberg.json");
    let disk = spec_path("unit_disk.json");
    for args in [
        vec!["exp", "--spec", bad, "--from", "0,0,0", "--p0", "1,0,0"],
        vec!["exp", "--spec", "/nonexistent.json", "--from", "0,0,0", "--p0", "1,0,0"],
        vec!["exp", "--spec", &heis, "--from", "0,0", "--p0", "1,0,0"],
        vec!["exp", "--spec", &disk, "--from", "2,0", "--p0", "1,0"],
        vec!["distance", "--spec", &heis, "--from", "0,0,0", "--to", "0,0,0"],
        vec!["sphere", "--spec", &heis, "--at", "0,0,0", "--r", "-1", "--n", "4"],
        vec!["probe-hopf-rinow", "--spec", &heis, "--region", "0:1,0:1"],
        vec!["geodesic", "--spec", &heis, "--from", "0,0,0"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn mathematical_failures_exit_1() {
    let disk = spec_path("unit_disk.json");
    let o = run(&["exp", "--spec", &disk, "--from", "0.9,0", "--p0", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
    let heis = spec_path("heisenberg.json");
    let o = run(&["exp", "--spec", &heis, "--from", "0,0,0", "--v0", "0,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exp_and_geodesic_outputs() {
    let heis = spec_path("heisenberg.json");
    let o = run(&["exp", "--spec", &heis, "--from", "0,0,0", "--p0", "1,0,0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["point"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let o = run(&["exp", "--spec", &heis, "--from", "0,0,0", "--v0", "1,0", "--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3,p1,p2,p3,y1,y2,y3"));
    assert_eq!(lines.count(), 1);

    let o = run(&["geodesic", "--spec", &heis, "--from", "0,0,0", "--p0", "1,0,1", "--T", "2", "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 200);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!((v["H"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    }
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("status=completed"));
}

#[test]
fn out_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sphere.csv");
    let heis = spec_path("heisenberg.json");
    let o = run(&[
        "sphere", "--spec", &heis, "--at", "0,0,0", "--r", "1", "--n", "6", "--format", "csv", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["p1", "p2", "p3", "y1", "y2", "y3", "status", "t"]);
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| &r[6] == "completed"));
}

#[test]
fn bracket_and_completeness() {
    let o = run(&["check-bracket", "--spec", &spec_path("heisenberg.json"), "--at", "0,0,0"]);
    assert_eq!(stdout(&o), "generating=true growth=[2,3]\n");
    let o = run(&["check-bracket", "--spec", &spec_path("involutive.json"), "--at", "0,0,0", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["generating"], false);

    let o = run(&["probe-completeness", "--spec", &spec_path("unit_disk.json"), "--at", "0,0", "--dirs", "8"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["completed"], 0);
    assert_eq!(v["fraction_extendable"], 0.0);
    let o = run(&["probe-completeness", "--spec", &spec_path("plane.json"), "--at", "0,0", "--dirs", "8"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["fraction_extendable"], 1.0);
}

#[test]
fn hopf_rinow_report() {
    let o = run(&[
        "probe-hopf-rinow", "--spec", &spec_path("randers_plane.json"), "--region", "-1:1,-1:1", "--pairs", "3", "--Tmax",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kind"], "estimate");
    assert_eq!(v["success_fraction"], 1.0);
    assert_eq!(v["triangle"]["violations"], 0);
    assert!(v["asymmetry"]["max_abs"].as_f64().unwrap() > 0.0);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn help_exits_0() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("probe-hopf-rinow"));
}
