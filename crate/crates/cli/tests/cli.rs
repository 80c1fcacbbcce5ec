use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudoshift"))
        .args(args)
        .env_remove("PSEUDOSHIFT_PRIME_CACHE")
        .output()
        .expect("binary runs")
}

fn run_with(cfg: &str, args: &[&str]) -> (i32, Value) {
    let path = config(cfg);
    let mut all = vec!["--config", path.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = run(&all);
    let text = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (out.status.code().unwrap(), value)
}

fn keys(v: &Value) -> Vec<u64> {
    v.as_object().unwrap().keys().map(|k| k.parse().unwrap()).collect()
}

#[test]
fn successor_has_a_single_orbit() {
    let (code, v) = run_with("rolewicz_l2.json", &["analyze-map", "--horizon-orbit", "50"]);
    assert_eq!(code, 0);
    let groups = &v["partitions"][0]["groups"];
    assert_eq!(groups.as_array().unwrap().len(), 1);
    assert_eq!(groups[0]["generator"], 1);
    assert_eq!(groups[0]["members"].as_array().unwrap().len(), 50);
    assert_eq!(keys(&v["generators"]["1"]), vec![1]);
    assert_eq!(keys(&v["generators"]["3"]), vec![1, 2, 3]);
}

#[test]
fn first_example_is_refuted_structurally() {
    let (code, v) = run_with("first_example.json", &["analyze-map"]);
    assert_eq!(code, 0);
    assert_eq!(v["structural"]["injective"]["kind"], "refuted");
    assert_eq!(v["structural"]["injective"]["evidence"]["first"], 4);
    assert_eq!(v["structural"]["injective"]["evidence"]["second"], 5);
    assert_eq!(v["structural"]["periodic"]["kind"], "refuted");
    assert!(v["partitions"].is_null());
}

#[test]
fn two_orbit_generators() {
    let (_, v) = run_with("two_orbit.json", &["analyze-map", "--horizon-orbit", "200"]);
    assert_eq!(keys(&v["generators"]["1"]), vec![1, 2]);
    assert!(v["generators"]["1"].as_object().unwrap().values().all(|e| e == true));
}

#[test]
fn check_exit_codes() {
    for (cfg, cmd, want) in [
        ("closing_lp.json", "check-chaotic", 0),
        ("closing_c0.json", "check-chaotic", 0),
        ("rolewicz_l1.json", "check-chaotic", 0),
        ("rolewicz_c0.json", "check-hypercyclic", 0),
        ("unit_weights.json", "check-hypercyclic", 1),
        ("first_example.json", "check-hypercyclic", 1),
    ] {
        let (code, v) = run_with(cfg, &[cmd]);
        assert_eq!(code, want, "{cfg} {cmd}: {}", v["overall"]);
    }
    let (_, v) = run_with("unit_weights.json", &["check-hypercyclic"]);
    assert_eq!(v["overall"]["evidence"]["type"], "bounded");
}

#[test]
fn explicit_samples_override_config() {
    let (code, v) = run_with("closing_lp.json", &["check-chaotic", "--samples", "1,2,7"]);
    assert_eq!(code, 0);
    let ks: Vec<u64> = v["samples"].as_array().unwrap().iter().map(|s| s["k"].as_u64().unwrap()).collect();
    assert_eq!(ks, vec![1, 2, 7]);
}

#[test]
fn periodic_point_has_zero_residual() {
    let (code, v) = run_with("rolewicz_l2.json", &["periodic", "--k", "1", "--period", "1", "--mode", "exact"]);
    assert_eq!(code, 0);
    assert_eq!(v["residual"].as_f64(), Some(0.0));
    assert_eq!(v["entries"]["1"], 1);
    assert_eq!(v["entries"]["3"], "1/4");
    assert_eq!(v["sentinel"], true);
    assert!(v["tail_bound"].as_f64().unwrap() < 1e-11);
}

#[test]
fn simulate_annihilates_e1() {
    let e1 = config("e1.json");
    let (code, v) = run_with("rolewicz_l2.json", &["simulate", "--vector", e1.to_str().unwrap(), "--steps", "4"]);
    assert_eq!(code, 0);
    let norms: Vec<f64> = v["steps"].as_array().unwrap().iter().map(|s| s["norm"].as_f64().unwrap()).collect();
    assert_eq!(norms, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn simulate_shifts_mass_backward() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    std::fs::write(&x, r#"{"entries": {"3": 1}}"#).unwrap();
    let (_, v) = run_with("rolewicz_l2.json", &["simulate", "--vector", x.to_str().unwrap(), "--steps", "3"]);
    let norms: Vec<f64> = v["steps"].as_array().unwrap().iter().map(|s| s["norm"].as_f64().unwrap()).collect();
    assert_eq!(norms, vec![1.0, 2.0, 4.0, 0.0]);
    assert_eq!(v["steps"][2]["top"][0][0], 1);
}

#[test]
fn approx_meets_eps() {
    let e1 = config("e1.json");
    let (code, v) = run_with("rolewicz_l1.json", &["approx", "--target", e1.to_str().unwrap(), "--eps", "0.1"]);
    assert_eq!(code, 0);
    assert!(v["achieved"].as_f64().unwrap() < 0.1);
    let n = v["N"].as_u64().unwrap();
    // untruncated: ‖x − e₁‖₁ = Σ_{j≥1} 2^{-jN}
    let full = 2f64.powi(-(n as i32)) / (1.0 - 2f64.powi(-(n as i32)));
    assert!(v["achieved"].as_f64().unwrap() <= full + 1e-15);
    assert!(v["bound"].as_f64().unwrap() >= full - 1e-15);
    assert!(full < 0.1);

    let target = config("ones_1_to_5.json");
    let (code, v) = run_with("closing_lp.json", &["approx", "--target", target.to_str().unwrap(), "--eps", "1e-3"]);
    assert_eq!(code, 0);
    assert!(v["achieved"].as_f64().unwrap() < 1e-3);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("two_orbit.json");
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let status = run(&[
            "analyze-map",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ])
        .status;
        assert!(status.success());
        texts.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert!(!texts[0].is_empty());
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = run(&[
        "check-chaotic",
        "--config",
        config("closing_lp.json").to_str().unwrap(),
        "--samples",
        "1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("e-")).expect("a float");
    let token = line
        .split([' ', ',', '[', ']', ':'])
        .find(|t| t.contains("e-"))
        .unwrap();
    let mantissa = token.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{token}");
}

#[test]
fn csv_output() {
    let out = run(&[
        "analyze-map",
        "--config",
        config("two_orbit.json").to_str().unwrap(),
        "--horizon-orbit",
        "10",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,index,generator,exact"));
    assert_eq!(lines.count(), 30);
    assert!(text.contains("\n1,5,1,true\n"));

    let out = run(&[
        "check-hypercyclic",
        "--config",
        config("unit_weights.json").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,kind,forward,backward,sufficiency_error\n"));
    assert!(text.lines().last().unwrap().starts_with("overall,refuted"));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["analyze-map"]).status.code(), Some(64));
    let cfg = config("closing_lp.json");
    let out = run(&["periodic", "--config", cfg.to_str().unwrap(), "--k", "0", "--period", "1"]);
    assert_eq!(out.status.code(), Some(64));
    let out = Command::new(env!("CARGO_BIN_EXE_pseudoshift"))
        .args(["analyze-map", "--config", cfg.to_str().unwrap()])
        .env("PSEUDOSHIFT_PRIME_CACHE", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn missing_files_differ_from_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = run(&["analyze-map", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(66));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"map\": {\"default\": {\"affine\": {\"a\": 1, \"b\": 1}}},\n  \"weights\": {\"default\": {\"cnst\": 2}}\n}\n").unwrap();
    let out = run(&["analyze-map", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(":3:"), "{err}");
    assert!(err.contains("weights.default"), "{err}");

    let bad_p = dir.path().join("p.json");
    std::fs::write(
        &bad_p,
        r#"{"map": {"default": {"affine": {"a": 1, "b": 1}}}, "weights": {"default": {"const": 2}}, "space": {"lp": 0.5}}"#,
    )
    .unwrap();
    let out = run(&["analyze-map", "--config", bad_p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(65));

    let cfg = config("rolewicz_l2.json");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--vector", missing.to_str().unwrap(), "--steps", "1"]);
    assert_eq!(out.status.code(), Some(66));
}

#[test]
fn dot_output() {
    let out = run(&["analyze-map", "--config", config("two_orbit.json").to_str().unwrap(), "--dot"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"), "{text}");
    assert!(text.contains("1 -> 5"));
}
