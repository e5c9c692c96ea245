use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fairharvest(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairharvest")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = fairharvest(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn generate(dir: &Path, args: &[&str]) {
    let mut all = vec!["generate"];
    all.extend(args);
    assert_eq!(code(dir, &all), 0, "{args:?}");
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    fairharvest(dir, args).status.code().unwrap()
}

fn rates(v: &Value) -> Vec<f64> {
    v["sorted_rates"].as_array().unwrap().iter().map(|r| r.as_f64().unwrap()).collect()
}

#[test]
fn seeded_generation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.json", "b.json"] {
        assert_eq!(code(d, &["generate", "random", "--n", "4", "--t", "3", "--seed", "7", "--out", name]), 0);
    }
    let a = std::fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.json")).unwrap());
    assert_eq!(code(d, &["generate", "random", "--n", "4", "--t", "3", "--seed", "8", "--out", "c.json"]), 0);
    assert_ne!(a, std::fs::read(d.join("c.json")).unwrap());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["random", "--n", "3", "--t", "2", "--seed", "3", "--out", "s.json"]);
    for cmd in ["fixed-fractional", "fractional-fptas"] {
        ok(d, &[cmd, "s.json", "--out", "one"]);
        ok(d, &[cmd, "s.json", "--out", "two"]);
        for file in ["rates.csv", "flows.csv"] {
            let a = std::fs::read(d.join("one").join(file)).unwrap();
            assert_eq!(a, std::fs::read(d.join("two").join(file)).unwrap(), "{cmd} {file}");
        }
        let strip = |dir: &str| {
            let mut v: Value = serde_json::from_slice(&std::fs::read(d.join(dir).join("summary.json")).unwrap()).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            v
        };
        assert_eq!(strip("one"), strip("two"), "{cmd}");
    }
}

#[test]
fn fig2_given_paths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["fig2", "--out", "fig2.json"]);
    let scenario: Value = serde_json::from_slice(&std::fs::read(d.join("fig2.json")).unwrap()).unwrap();
    std::fs::write(d.join("fig2_paths.json"), scenario["paths"].to_string()).unwrap();
    let v = ok(d, &["unsplittable-rates", "fig2.json", "--paths", "fig2_paths.json", "--out", "r"]);
    assert!(rates(&v).iter().all(|r| (r - 1.0 / 3.0).abs() < 1e-9));
    let csv = std::fs::read_to_string(d.join("r").join("rates.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("node,slot,rate"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn fig4_routing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["fig4", "--k", "3", "--out", "fig4.json"]);
    let v = ok(d, &["find-unsplittable", "fig4.json", "--oracle", "--out", "r"]);
    assert!((v["min_rate"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(v["oracle"]["within_tolerance"], Value::Bool(true));
    assert!(d.join("r").join("routing.json").exists());
}

#[test]
fn fig2_fptas_within_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["fig2", "--out", "fig2.json"]);
    let v = ok(d, &["fractional-fptas", "fig2.json", "--epsilon", "0.1", "--oracle"]);
    assert!(rates(&v).iter().all(|&r| (0.3..=0.3334).contains(&r)), "{v}");
    assert_eq!(v["oracle"]["within_tolerance"], Value::Bool(true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, &["fig4", "--k", "2", "--out", "fig4.json"]);
    // invalid input: usage, parse, validation, missing paths, bad parameters
    assert_eq!(code(d, &["no-such-command"]), 3);
    assert_eq!(code(d, &["fixed-fractional", "missing.json"]), 3);
    assert_eq!(code(d, &["unsplittable-rates", "fig4.json"]), 3);
    assert_eq!(code(d, &["fractional-fptas", "fig4.json", "--epsilon", "1.5"]), 3);
    assert_eq!(code(d, &["generate", "fig5", "--k", "1"]), 3);
    let mut s: Value = serde_json::from_slice(&std::fs::read(d.join("fig4.json")).unwrap()).unwrap();
    s["edges"] = Value::Array(Vec::new());
    std::fs::write(d.join("cut.json"), s.to_string()).unwrap();
    let out = fairharvest(d, &["fixed-fractional", "cut.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
    // no positive common rate: a lone sensor without energy
    let empty = serde_json::json!({
        "nodes": 2, "sink": 1, "edges": [[0, 1]], "T": 1, "B": 1.0,
        "initial_battery": [0.0, 0.0], "harvest": [[0.0], [0.0]],
        "c_s": 1.0, "c_tx": 0.0, "c_rx": 1.0
    });
    std::fs::write(d.join("empty.json"), empty.to_string()).unwrap();
    assert_eq!(code(d, &["find-unsplittable", "empty.json"]), 2);
    assert_eq!(code(d, &["--help"]), 0);
}
