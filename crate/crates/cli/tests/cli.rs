use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irlobs"))
}

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn are_prints_solution_and_stable_eigenvalues() {
    let out = bin().args(["are", "--config"]).arg(default_config()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Riccati solution P"));
    let eig: Vec<f64> = text
        .lines()
        .skip_while(|l| !l.starts_with("closed-loop eigenvalues"))
        .skip(1)
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(eig.len(), 4);
    assert!(eig.iter().all(|&re| re < 0.0));
}

#[test]
fn run_writes_report_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(&cfg, "[run]\nduration = 2.0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--mode", "observed", "--seed", "9", "--full-rate"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["ptilde.csv", "qtilde.csv", "thetatilde.csv", "wtilde.csv", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let rows = fs::read_to_string(out_dir.join("ptilde.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2001);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["mode"], "observed");
    assert_eq!(summary["queries"], 0);
}

#[test]
fn bad_config_fails_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[gains]\nalpha = 0.0\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gains.alpha"));
}

#[test]
fn unknown_mode_is_rejected() {
    let out = bin()
        .args(["run", "--config"])
        .arg(default_config())
        .args(["--out", "/nonexistent", "--mode", "sideways"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
