use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn granular(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_granular")).args(args).output().unwrap()
}

#[test]
fn unknown_subcommand_prints_usage() {
    let o = granular(&["melt"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("usage:"), "{err}");
    assert!(err.contains("qscaling"));
}

#[test]
fn every_bad_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "seed = 3\n[dsmc]\nn_particles = 1\nwarp = 9\n[haff]\ntail_fraction = 2\n").unwrap();
    let out = dir.path().join("out");
    let o = granular(&["haff", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for key in ["dsmc.n_particles", "dsmc.warp", "haff.tail_fraction"] {
        assert!(err.contains(key), "{key} missing from: {err}");
    }
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn constants_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = granular(&["constants", "--set", "restitution.a0=0.5", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("constants.json")).unwrap()).unwrap();
    let ratio = c["ratio"].as_f64().unwrap();
    assert!((ratio - 1.2).abs() < 1e-8);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "constants");
    assert_eq!(m["config"]["restitution.a0"], "0.5");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn hydro_rejects_constant_restitution() {
    let dir = tempfile::tempdir().unwrap();
    let o = granular(&["hydro", "--set", "restitution.kind=constant", "--set", "restitution.e0=0.9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn hydro_cfl_violation_is_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = granular(&["hydro", "--set", "hydro.n=32", "--set", "hydro.dt=0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn hydro_restarts_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let base = ["--set", "hydro.n=16", "--set", "hydro.t_end=0.02"];
    let mut a = vec!["hydro", "--set", "hydro.snapshot=true", "--out", d];
    a.extend(base);
    assert!(granular(&a).status.success());
    let mut b = vec!["hydro", "--set", "hydro.initial=file", "--set", "hydro.file=snapshot.bin", "--out", d];
    b.extend(base);
    let o = granular(&b);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
