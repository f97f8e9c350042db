use std::path::Path;
use std::process::{Command, Output};

use cohlab::experiment::read_csv;
use cohlab::Flat;

fn cohlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn cohlab")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn coherence_formula_example() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&cohlab(&["coherence", "--model", "lowrank:m=3,n=3,r=1", "--formula"], dir.path()));
    assert!((v["value"].as_f64().unwrap() - 5.0 / 9.0).abs() < 1e-12);
    assert_eq!(v["exact"], true);
}

#[test]
fn coherence_with_leverage_sums_to_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&cohlab(
        &["coherence", "--model", "cayley:n=6,d=2", "--seed", "3", "--leverage"],
        dir.path(),
    ));
    let lev: Vec<f64> = v["leverage"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(lev.len(), 15);
    assert!((lev.iter().sum::<f64>() - 9.0).abs() < 1e-9);
    let max = lev.iter().cloned().fold(0.0, f64::max);
    assert_eq!(v["value"].as_f64().unwrap(), max);
}

#[test]
fn identify_example_reports_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&cohlab(
        &["identify", "--model", "lowrank:m=2,n=2,r=1", "--mask", "0,1,2", "--seed", "5", "--tol", "1e-8"],
        dir.path(),
    ));
    assert_eq!(v["identifiable"], true);
    for key in ["tangent_dim", "projected_rank", "smallest_retained_singular_value", "tolerance_used"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let v = json(&cohlab(
        &["identify", "--model", "lowrank:m=2,n=2,r=1", "--mask", "0,1", "--seed", "5"],
        dir.path(),
    ));
    assert_eq!(v["identifiable"], false);
}

#[test]
fn sweep_example_is_byte_identical_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--model", "cayley:n=10,d=2", "--rho-grid", "0.1:1.0:0.1", "--trials", "50", "--seed", "1", "--out",
        "s.csv",
    ];
    assert!(cohlab(&args, dir.path()).status.success());
    let first = std::fs::read(dir.path().join("s.csv")).unwrap();
    assert!(cohlab(&args, dir.path()).status.success());
    let second = std::fs::read(dir.path().join("s.csv")).unwrap();
    assert_eq!(first, second);

    let (meta, records) = read_csv(&dir.path().join("s.csv")).unwrap();
    assert_eq!(meta.model, "cayley:n=10,d=2");
    assert_eq!(meta.base_seed, 1);
    assert_eq!(meta.trials, 50);
    assert_eq!(records.len(), 10);
    assert_eq!(records[9].success_rate, 1.0);
    assert!(meta.extra("coherence").is_some() && meta.extra("theoretical_rate").is_some());
    let body = String::from_utf8(first).unwrap();
    assert!(body.lines().any(|l| l == "rho,trials,successes,success_rate,ci_low,ci_high"));
}

#[test]
fn frame_writes_a_flat_file() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cohlab(&["frame", "--n", "7", "--k", "3", "--out", "f.flat"], dir.path()).status.success());
    let flat: Flat = std::fs::read_to_string(dir.path().join("f.flat")).unwrap().parse().unwrap();
    assert_eq!((flat.ambient_dim(), flat.dim()), (7, 3));
    assert!((flat.coherence() - 3.0 / 7.0).abs() < 1e-9);

    let v = json(&cohlab(&["coherence", "--model", "linear:@f.flat"], dir.path()));
    assert!((v["value"].as_f64().unwrap() - 3.0 / 7.0).abs() < 1e-9);
}

#[test]
fn tangent_limit_prints_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&cohlab(&["tangent-limit", "--seed", "8"], dir.path()));
    let pairs = v["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 4);
    assert_eq!(pairs[0]["h"].as_f64().unwrap(), 10.0);
    assert!((v["loglog_slope"].as_f64().unwrap() + 2.0).abs() < 0.2);
}

#[test]
fn rudelson_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = cohlab(
        &["rudelson", "--n", "32", "--k", "4", "--rho-grid", "0.5,1.0", "--trials", "10", "--seed", "2"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho,mean_norm,max_leverage,bound_shape");
    assert!(lines[2].starts_with("1.0,0.0,"), "{}", lines[2]);
}

#[test]
fn rigidity_oracle_prints_boolean() {
    let dir = tempfile::tempdir().unwrap();
    let out = cohlab(&["rigidity-oracle", "--n", "4", "--edges", "0-1,1-2,2-3,3-0"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "false");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| cohlab(args, dir.path()).status.code();
    assert_eq!(status(&["coherence", "--model", "lowrank:m=3,n=3,r=1", "--unknown"]), Some(2));
    assert_eq!(status(&["sweep", "--model", "lowrank:m=3,n=3,r=1", "--rho-grid", "0.5", "--trials", "3"]), Some(2));
    assert_eq!(status(&["identify", "--model", "lowrank:m=2,n=2,r=1", "--mask", "0,9", "--seed", "1"]), Some(2));

    std::fs::write(dir.path().join("line.txt"), "0 0\n1 0\n2 0\n3 0\n").unwrap();
    let out = cohlab(&["tangent-limit", "--positions", "line.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank-deficient"));
}

#[test]
fn resolved_config_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "model=lowrank:m=4,n=4,r=1\nformula=true\n").unwrap();
    let out = cohlab(&["coherence", "--config", "run.conf"], dir.path());
    let log = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(log.contains("resolved") && log.contains("lowrank:m=4,n=4,r=1"), "{log}");
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 7.0 / 16.0).abs() < 1e-12);
}
