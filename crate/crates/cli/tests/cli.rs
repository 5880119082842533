use std::process::{Command, Output};

fn csplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csplab")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_reports_constants() {
    let v = json(&csplab(&["analyze", "--ensemble", "hyp2col", "--k", "4"]));
    assert_eq!(v["omega"]["value"], 7.0);
    assert_eq!(v["omega"]["provenance"], "paper formula");
    assert_eq!(v["omega_le_omega_hat"], true);
}

#[test]
fn exit_codes() {
    let bad = csplab(&["analyze", "--ensemble", "bogus", "--k", "3"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));

    let missing = csplab(&["tree-recon", "--ensemble", "xor", "--k", "4", "--depth", "2"]);
    assert_eq!(missing.status.code(), Some(2));

    let capped = Command::new(env!("CARGO_BIN_EXE_csplab"))
        .args(["tree-recon", "--ensemble", "hyp2col", "--k", "3", "--alpha", "2", "--depth", "8", "--samples", "10"])
        .env("CSPLAB_MAX_NODES", "100")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(3));

    let unwritable = csplab(&["analyze", "--ensemble", "xor", "--k", "4", "--out", "/nonexistent/dir/out.json"]);
    assert_eq!(unwritable.status.code(), Some(1));

    assert!(!csplab(&["no-such-command"]).status.success());
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"ensemble": "xor", "k": 4, "alpha": 0.5, "depth": 2, "samples": 200, "seed": 2}"#)
        .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = csplab(&["tree-recon", "--config", cfg]);
    let explicit = csplab(
        &"tree-recon --ensemble xor --k 4 --alpha 0.5 --depth 2 --samples 200 --seed 2".split(' ').collect::<Vec<_>>(),
    );
    assert_eq!(json(&from_file), json(&explicit));
    let overridden = csplab(&["tree-recon", "--config", cfg, "--seed", "3"]);
    assert_ne!(json(&overridden), json(&explicit));

    std::fs::write(dir.path().join("bad.json"), r#"{"ensembel": "xor"}"#).unwrap();
    let bad = csplab(&["analyze", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let out =
        csplab(&["thresholds", "--ensemble", "xor", "--table", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("ensemble,k,"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn worker_count_does_not_change_output() {
    let args = ["tree-recon", "--ensemble", "hyp2col", "--k", "3", "--alpha", "1", "--depth", "4", "--samples", "500"];
    let one = csplab(&[&args[..], &["--workers", "1"]].concat());
    let three = csplab(&[&args[..], &["--workers", "3"]].concat());
    assert_eq!(json(&one), json(&three));
}
