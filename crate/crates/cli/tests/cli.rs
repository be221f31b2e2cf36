use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fpkfv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpkfv")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_DRIFT: &str = r#"{
    "grid": {"domain": [0, 1, 0, 1], "nx": 6, "ny": 5},
    "flow": {"kind": "constant", "ux": 1.0, "uy": -0.5},
    "diffusion": 0.3,
    "paths": 10,
    "horizon": 50.0
}"#;

#[test]
fn steady_prints_summary_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "steady.json", SMALL_DRIFT);
    let out = dir.path().join("out");
    let o = fpkfv(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_cells"], 30);
    assert!(out.join("steady.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn walk_is_reproducible_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "walk.json", SMALL_DRIFT);
    let a = fpkfv(&["walk", "--config", &cfg, "--seed", "5"]);
    let b = fpkfv(&["walk", "--config", &cfg, "--seed", "5"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 5);
}

#[test]
fn validation_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"diffusion": -1.0}"#);
    assert_eq!(fpkfv(&["vdp", "--config", &bad]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "unknown.json", r#"{"difusion": 1.0}"#);
    assert_eq!(fpkfv(&["sample", "--config", &unknown]).status.code(), Some(2));
    let missing = dir.path().join("none.json");
    assert_eq!(
        fpkfv(&["sample", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let wrong_kind = write_config(dir.path(), "kind.json", r#"{"scenario": "vdp"}"#);
    assert_eq!(fpkfv(&["sample", "--config", &wrong_kind]).status.code(), Some(2));
}

#[test]
fn convergence_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "vdp.json",
        r#"{"grid": {"nx": 10, "ny": 10}, "n_steps": 5, "max_iter": 3, "tol": 1e-14}"#,
    );
    assert_eq!(fpkfv(&["vdp", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn image_paths_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut pgm = b"P5\n4 3\n255\n".to_vec();
    pgm.extend([10u8, 200, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120]);
    fs::write(dir.path().join("target.pgm"), pgm).unwrap();
    let cfg = write_config(
        dir.path(),
        "image.json",
        r#"{"target_image": "target.pgm", "n_steps": 20, "snapshots": [20], "amplitudes": [0.0]}"#,
    );
    let out = dir.path().join("out");
    let o = fpkfv(&["image", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["width"], 4);
    assert_eq!(v["height"], 3);
}
