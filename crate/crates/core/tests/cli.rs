//! The `liesphere` binary end to end: outputs, determinism, exit codes.

use std::process::{Command, Output};

use serde_json::Value;

use liesphere::lie::{parallel_transformation, ParallelKind};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liesphere")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const SMALL: &[&str] = &["--max-points", "6", "--curve-points", "2"];

fn verify(extra: &[&str]) -> Output {
    let mut args = vec!["verify", "veronese-R"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn verify_real_veronese_passes_everything() {
    let out = verify(&[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 7);
    assert_eq!((v["n"].as_u64(), v["codim"].as_u64()), (Some(2), Some(2)));
    assert_eq!(v["k_observed"], 2);
    for check in ["k_umbilical", "unipotent", "cpc", "dupin"] {
        assert_eq!(v["verdicts"][check]["verdict"], "pass", "{check}");
    }
    assert_eq!(v["antipodal"]["check"]["verdict"], "pass");
    assert_eq!(v["passed"], true);
}

#[test]
fn mobius_deformation_keeps_dupin_and_breaks_unipotency() {
    let out = verify(&["--mobius-deform", "seed=7"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["verdicts"]["dupin"]["verdict"], "pass");
    assert_eq!(v["verdicts"]["unipotent"]["verdict"], "fail");
    let witness = &v["verdicts"]["unipotent"]["witness"];
    assert!(witness["u"].as_array().is_some_and(|u| u.len() == 2));
    assert!(witness["normal"].as_array().is_some_and(|n| n.len() == 2));

    let only_dupin = verify(&["--mobius-deform", "seed=7", "--require", "dupin"]);
    assert_eq!(only_dupin.status.code(), Some(0));
    let both = verify(&["--mobius-deform", "seed=7", "--require", "dupin,unipotent"]);
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn same_seed_same_bytes() {
    let a = verify(&["--seed", "123", "--mobius-deform", "seed=2"]);
    let b = verify(&["--seed", "123", "--mobius-deform", "seed=2"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 123);
    let c = run(&["lift", "clifford-torus", "--grid", "3", "--format", "csv", "--seed", "4"]);
    let d = run(&["lift", "clifford-torus", "--grid", "3", "--format", "csv", "--seed", "4"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn decompose_recovers_a_spherical_parallel_map() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, parallel_transformation(ParallelKind::Spherical, 0.3, 3).to_json().unwrap()).unwrap();
    let out = run(&["decompose", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["kind"], "spherical");
    assert!((v["t"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!(v["residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn sweep_csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectra.csv");
    let out = run(&["sweep", "clifford-torus", "--grid", "2", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,point,u,normal,eigenvalues,multiplicities,raw"));
    assert_eq!(lines.count(), 4 * 2);
}

#[test]
fn lift_reports_ranks_per_family() {
    let out = run(&["lift", "veronese-R", "--max-points", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let ranks: Vec<u64> = v["ranks"].as_array().unwrap().iter().map(|r| r["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks.len(), 3);
    assert!(ranks.iter().all(|&r| r >= 6), "{ranks:?}");
    // Euclidean charts are sent to the sphere first.
    let torus = json(&run(&["lift", "torus:2,1", "--grid", "3"]));
    assert!(torus["chart"].as_str().unwrap().starts_with("stereo("));
}

#[test]
fn envelope_subcommand() {
    let out = run(&["envelope", "torus:2,0.5", "--richardson"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert!(v["residuals"]["position"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["k"], 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["verify", "veronese-Z"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "blob:1,2"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "clifford-torus", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["decompose", "/nonexistent/matrix.json"]).status.code(), Some(2));
    assert_eq!(run(&["envelope", "blob:1"]).status.code(), Some(2));
    assert_eq!(run(&["lift", "hyperbolic-sphere:2,0.5"]).status.code(), Some(2));
    let help = run(&["--help-formats"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("schema_version"));
}
