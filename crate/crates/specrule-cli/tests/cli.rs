use std::path::Path;
use std::process::{Command, Output};

fn verify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_verify")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_TRK: &str = "seed = 3\ndims = [4, 8]\ntrials = 2\n";

#[test]
fn same_config_gives_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "trk.toml", SMALL_TRK);
    let a = verify(&["trk", "--config", &cfg, "--format", "json", "--jobs", "1"]);
    let b = verify(&["trk", "--config", &cfg, "--format", "json", "--jobs", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
    assert_eq!(v["summary"]["fail"], 0);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "trk.toml", SMALL_TRK);
    let a = verify(&["trk", "--config", &cfg, "--format", "json"]);
    let b = verify(&["trk", "--config", &cfg, "--format", "json", "--seed", "4"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn csv_has_one_row_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ms.toml", "dims = [3, 5]\ntrials = 2\n");
    let out = dir.path().join("out");
    let o = verify(&["matrix-sum", "--config", &cfg, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("name,lhs,rhs,residual_or_margin,tol,pass"));
    let json = verify(&["matrix-sum", "--config", &cfg, "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(lines.count(), v["checks"].as_array().unwrap().len());
}

#[test]
fn malformed_config_names_key_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (text, key) in [("seed = \"x\"\n", "seed"), ("dims = [4]\nwidth = 2\n", "width"), ("trials = \n", "trials")] {
        let cfg = write(dir.path(), "bad.toml", text);
        let o = verify(&["trk", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("`{key}`")), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(verify(&["trk", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(verify(&["not-a-suite"]).status.code(), Some(2));
    assert_eq!(verify(&["trk", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strict.toml", "dims = [8]\ntrials = 2\ntol = { \"trk-sum-rule\" = 0.0 }\n");
    let o = verify(&["trk", "--config", &cfg, "--format", "text"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn tolerance_scale_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "trk.toml", SMALL_TRK);
    let o = Command::new(env!("CARGO_BIN_EXE_verify"))
        .args(["trk", "--config", &cfg, "--format", "json"])
        .env("SPECRULE_TOL_SCALE", "10")
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["env"]["tol_scale"], 10.0);
    let bad = Command::new(env!("CARGO_BIN_EXE_verify")).args(["trk"]).env("SPECRULE_TOL_SCALE", "-1").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn lieb_thirring_writes_row_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "lt.toml", "lt_tau_well = [0.5, 1.0, 2.0]\nlt_tau_bump = [0.1, 0.3, 1.0]\nlt_n = 1001\n");
    let out = dir.path().join("out");
    let o = verify(&["lieb-thirring", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rows = std::fs::read_to_string(out.join("lieb_thirring.csv")).unwrap();
    assert_eq!(rows.lines().next(), Some("potential,tau,sum_sq,bound,margin"));
    assert_eq!(rows.lines().count(), 7);
}
