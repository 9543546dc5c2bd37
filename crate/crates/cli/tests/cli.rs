use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn eventnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventnet")).current_dir(root()).args(args).output().expect("spawn")
}

fn json_run(extra: &[&str]) -> Value {
    let mut args = vec!["run", "programs/kmedoids.py", "--data", "fixtures/four_points.json", "--json"];
    args.extend_from_slice(extra);
    let out = eventnet(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn bounds(v: &Value) -> Vec<(String, f64, f64)> {
    v["targets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| (t["eid"].as_str().unwrap().to_string(), t["lower"].as_f64().unwrap(), t["upper"].as_f64().unwrap()))
        .collect()
}

#[test]
fn naive_and_exact_agree() {
    let naive = bounds(&json_run(&["--mode", "naive"]));
    for mode in [&["--mode", "exact"][..], &["--mode", "exact", "--folded"], &["--mode", "exact-d", "--workers", "3", "--job-depth", "1"]] {
        let exact = bounds(&json_run(mode));
        assert_eq!(naive.len(), exact.len());
        for (a, b) in naive.iter().zip(&exact) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-9 && (b.1 - b.2).abs() < 1e-12, "{a:?} {b:?}");
        }
    }
}

#[test]
fn approximate_bounds_contain_truth() {
    let naive = bounds(&json_run(&["--mode", "naive"]));
    for mode in ["hybrid", "eager", "lazy", "hybrid-d"] {
        let approx = bounds(&json_run(&["--mode", mode, "--epsilon", "0.2", "--workers", if mode == "hybrid-d" { "2" } else { "1" }]));
        for (t, a) in naive.iter().zip(&approx) {
            assert!(a.1 <= t.1 + 1e-9 && t.1 <= a.2 + 1e-9, "{mode}: {a:?} vs {}", t.1);
            assert!(a.2 - a.1 <= 0.4 + 1e-9, "{mode}: {a:?}");
        }
    }
}

#[test]
fn cooccurrence_target() {
    let v = json_run(&["--mode", "naive", "--cooccur", "o2,o3"]);
    let co = bounds(&v).into_iter().find(|t| t.0.starts_with("Co")).expect("co-occurrence target");
    assert!((co.1 - 0.28).abs() < 1e-12);
}

#[test]
fn json_output_is_stable() {
    let args = ["run", "programs/kmedoids.py", "--data", "fixtures/four_points.json", "--json", "--mode", "hybrid", "--epsilon", "0.1"];
    let a = eventnet(&args);
    let b = eventnet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emit_stages() {
    for (stage, needle) in [("ast", "for it in range"), ("event-program", ":="), ("grounded", "Centre_{0}^{0,0} :="), ("network", "")] {
        let out = eventnet(&["run", "programs/kmedoids.py", "--data", "fixtures/four_points.json", "--emit-stage", stage]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(!text.is_empty() && text.contains(needle), "{stage}:\n{text}");
    }
}

#[test]
fn naive_worlds_listing() {
    let out = eventnet(&["run", "programs/kmedoids.py", "--data", "fixtures/four_points.json", "--mode", "naive", "--worlds"]);
    assert!(out.status.success());
    let lines: Vec<Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 16);
    let total: f64 = lines.iter().map(|w| w["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn generate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.json");
    let report = dir.path().join("r.json");
    let d = data.to_str().unwrap();
    let out = eventnet(&["gen", "--scheme", "markov", "--n", "8", "--group", "2", "--iter", "2", "--seed", "3", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = eventnet(&["run", "programs/kmedoids.py", "--data", d, "--mode", "hybrid", "--epsilon", "0.05", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["mode"], "hybrid");
    assert!(v["stats"]["branches"].as_u64().unwrap() > 0);
}

#[test]
fn check_passes() {
    let out = eventnet(&["check", "--count", "10", "--vars", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().contains("0 violations"));
    let out = eventnet(&["check", "programs/kmedoids.py", "--data", "fixtures/four_points.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn rejects_bad_arguments() {
    let base = ["run", "programs/kmedoids.py", "--data", "fixtures/four_points.json"];
    let cases: [&[&str]; 5] = [
        &["--mode", "exact", "--epsilon", "0.1"],
        &["--mode", "hybrid", "--workers", "4"],
        &["--mode", "hybrid", "--epsilon", "1.5"],
        &["--cooccur", "o0,o9"],
        &["--mode", "bogus"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let out = eventnet(&args);
        assert!(!out.status.success(), "{extra:?} accepted");
        assert!(!out.stderr.is_empty());
    }
    assert!(!eventnet(&["run", "missing.py", "--data", "fixtures/four_points.json"]).status.success());
}
