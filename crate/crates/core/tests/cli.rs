use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cotlab::io::{parse_path_law, path_law_to_json, tau_to_json};
use cotlab::random::{random_law, random_tau, rng, LawKind, TauKind};
use serde_json::Value;
use tempfile::TempDir;

const ADAPTED: &str = r#"{
  "N": 2,
  "y_alphabets": [["a", "b"]],
  "x_alphabets": [["0", "1"]],
  "support": [
    {"y": ["a", "a"], "x": ["0", "0"], "w": "1/4"},
    {"y": ["a", "b"], "x": ["0", "1"], "w": "1/4"},
    {"y": ["b", "a"], "x": ["1", "0"], "w": "1/4"},
    {"y": ["b", "b"], "x": ["1", "1"], "w": "1/4"}
  ]
}"#;

// X at the first step copies Y at the second step.
const ANTICIPATIVE: &str = r#"{
  "N": 2,
  "y_alphabets": [["a", "b"]],
  "x_alphabets": [["0", "1"]],
  "support": [
    {"y": ["a", "a"], "x": ["0", "0"], "w": "1/4"},
    {"y": ["a", "b"], "x": ["1", "0"], "w": "1/4"},
    {"y": ["b", "a"], "x": ["0", "0"], "w": "1/4"},
    {"y": ["b", "b"], "x": ["1", "0"], "w": "1/4"}
  ]
}"#;

// Guess the second coin at the first step; the cost counts wrong guesses.
const COIN_GUESS: &str = r#"{
  "N": 2,
  "y_alphabets": [["h", "t"]],
  "x_alphabets": [["h", "t"]],
  "mu": [
    {"y": ["h", "h"], "w": "1/4"},
    {"y": ["h", "t"], "w": "1/4"},
    {"y": ["t", "h"], "w": "1/4"},
    {"y": ["t", "t"], "w": "1/4"}
  ],
  "cost": [
    {"y": ["h", "t"], "x": ["h", "h"], "c": "1"},
    {"y": ["h", "t"], "x": ["h", "t"], "c": "1"},
    {"y": ["t", "t"], "x": ["h", "h"], "c": "1"},
    {"y": ["t", "t"], "x": ["h", "t"], "c": "1"},
    {"y": ["h", "h"], "x": ["t", "h"], "c": "1"},
    {"y": ["h", "h"], "x": ["t", "t"], "c": "1"},
    {"y": ["t", "h"], "x": ["t", "h"], "c": "1"},
    {"y": ["t", "h"], "x": ["t", "t"], "c": "1"}
  ],
  "sense": "min"
}"#;

struct Run {
    code: i32,
    stdout: String,
}

fn cotlab(args: &[&str]) -> Run {
    let Output { status, stdout, .. } = Command::new(env!("CARGO_BIN_EXE_cotlab")).args(args).output().expect("spawn");
    Run { code: status.code().expect("exit code"), stdout: String::from_utf8(stdout).expect("utf-8") }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("json output")
}

#[test]
fn check_compat_accepts_adapted_law() {
    let d = TempDir::new().unwrap();
    let f = write(&d, "law.json", ADAPTED);
    let r = cotlab(&["check-compat", "--instance", s(&f)]);
    assert_eq!(r.code, 0);
    let v = json(&r.stdout);
    assert_eq!(v["ok"], true);
    assert_eq!(v["max_violation"], "0");
}

#[test]
fn check_compat_reports_witness() {
    let d = TempDir::new().unwrap();
    let f = write(&d, "law.json", ANTICIPATIVE);
    let r = cotlab(&["check-compat", "--instance", s(&f)]);
    assert_eq!(r.code, 0);
    let v = json(&r.stdout);
    assert_eq!(v["ok"], false);
    assert_eq!(v["witness"]["n"], 1);

    let all = json(&cotlab(&["check-compat", "--instance", s(&f), "--all-checkers"]).stdout);
    assert_eq!(all["ok"], false);

    let float = json(&cotlab(&["check-compat", "--instance", s(&f), "--mode", "float"]).stdout);
    assert_eq!(float["ok"], false);
    assert!(float["max_violation"].as_f64().unwrap() > 0.4);
}

#[test]
fn domain_errors_exit_one_with_json() {
    let d = TempDir::new().unwrap();
    let f = write(&d, "law.json", ANTICIPATIVE);
    let r = cotlab(&["decompose", "--instance", s(&f)]);
    assert_eq!(r.code, 1);
    assert_eq!(json(&r.stdout)["error"], "NotCompatible");

    let bad = write(&d, "bad.json", r#"{"N": 1, "y_alphabets": [["a"]], "x_alphabets": [["0"]], "support": [{"y": ["a"], "x": ["0"], "w": "1/2"}]}"#);
    let r = cotlab(&["check-compat", "--instance", s(&bad)]);
    assert_eq!(r.code, 1);
    assert!(json(&r.stdout)["error"].is_string());

    let r = cotlab(&["check-compat", "--instance", s(&d.path().join("missing.json"))]);
    assert_eq!(r.code, 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cotlab(&["no-such-command"]).code, 2);
    assert_eq!(cotlab(&["check-compat"]).code, 2);
    assert_eq!(cotlab(&["check-compat", "--instance", "x", "--mode", "fuzzy"]).code, 2);
}

#[test]
fn decompose_reconstructs_the_law() {
    let d = TempDir::new().unwrap();
    let law = random_law(&mut rng(7), LawKind::AdaptedMixture).unwrap();
    let f = write(&d, "law.json", &path_law_to_json(&law));
    let r = cotlab(&["decompose", "--instance", s(&f)]);
    assert_eq!(r.code, 0);
    let comps = json(&r.stdout)["components"].as_array().unwrap().clone();
    assert!(!comps.is_empty());
    let total: num_rational::BigRational = comps.iter().map(|c| c["weight"].as_str().unwrap().parse::<num_rational::BigRational>().unwrap()).sum();
    assert_eq!(total, num_rational::BigRational::from_integer(1.into()));
}

#[test]
fn causal_ot_shows_the_gap() {
    let d = TempDir::new().unwrap();
    let f = write(&d, "model.json", COIN_GUESS);
    let r = cotlab(&["causal-ot", "--instance", s(&f)]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = json(&r.stdout);
    assert_eq!(v["value"], "1/2");
    assert_eq!(v["unconstrained_value"], "0");
    let law = write(&d, "law.json", &serde_json::to_string(&v["law"]).unwrap());
    assert!(parse_path_law(&std::fs::read_to_string(&law).unwrap()).is_ok());
    assert_eq!(json(&cotlab(&["check-compat", "--instance", s(&law)]).stdout)["ok"], true);

    let r = cotlab(&["control", "--instance", s(&f)]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}

#[test]
fn stopping_reports_and_decomposes() {
    let d = TempDir::new().unwrap();
    let (tau, mu) = random_tau(&mut rng(3), TauKind::Mixture).unwrap();
    let f = write(&d, "tau.json", &tau_to_json(&tau, &mu));
    let r = cotlab(&["stopping", "--instance", s(&f)]);
    assert_eq!(r.code, 0);
    assert_eq!(json(&r.stdout)["ok"], true);
    assert_eq!(cotlab(&["stopping", "--instance", s(&f), "--decompose"]).code, 0);

    let fam = write(&d, "fam.json", r#"{"family": "independent_uniform"}"#);
    let r = cotlab(&["stopping", "--instance", s(&fam), "--approximate", "--refine", "4,8"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.starts_with("m,w1_gap"));
}

#[test]
fn refinement_tables_are_csv() {
    let d = TempDir::new().unwrap();
    let fam = write(&d, "fam.json", r#"{"family": "independent_product", "N": 2}"#);
    let r = cotlab(&["adapted-approx", "--instance", s(&fam), "--refine", "2,4"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let mut rdr = csv::Reader::from_reader(r.stdout.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["m", "stable_gap", "w1_gap", "bound"]);
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn outputs_are_reproducible() {
    let d = TempDir::new().unwrap();
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    assert_eq!(cotlab(&["demo-rotation", "--n", "4", "--grid", "8", "--out", s(&a)]).code, 0);
    assert_eq!(cotlab(&["demo-rotation", "--n", "4", "--grid", "8", "--out", s(&b)]).code, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn suite_writes_one_table_per_criterion() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("run");
    let r = cotlab(&["suite", "--out", s(&out), "--seed", "11"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.stdout.lines().filter(|l| l.starts_with("criterion")).count(), 10);
    let csvs = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count();
    assert_eq!(csvs, 10);
    assert!(out.join("summary.txt").exists());
}

#[test]
fn monge_approx_lists_levels() {
    let d = TempDir::new().unwrap();
    let space = std::sync::Arc::new(cotlab::measure::FiniteSpace::midpoint_grid(4).unwrap());
    let q = |n: i64| num_rational::BigRational::new(n.into(), 8.into());
    let mass = vec![vec![q(2), q(0)], vec![q(1), q(1)], vec![q(0), q(2)], vec![q(1), q(1)]];
    let target = std::sync::Arc::new(cotlab::measure::FiniteSpace::midpoint_grid(2).unwrap());
    let p = cotlab::measure::Coupling::new(space, target, mass).unwrap();
    let f = write(&d, "p.json", &cotlab::io::coupling_to_json(&p));
    let r = cotlab(&["monge-approx", "--instance", s(&f)]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let mut rdr = csv::Reader::from_reader(r.stdout.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["level", "cells", "representable", "stable_gap", "bound", "w1_gap"]
    );
    assert_eq!(rdr.records().count(), 3);
}
