use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ttopinf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ttopinf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_heat(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(name);
    let o = run(&["generate", "heat", "--nx", "8", "--ny", "8", "-o", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

#[test]
fn generate_is_deterministic_and_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_heat(dir.path(), "a.ttoi");
    let b = small_heat(dir.path(), "b.ttoi");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let o = run(&["inspect", a.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\"dims\""), "{text}");
    assert!(text.contains("101"), "{text}");
    assert!(text.contains("sha256:"));
}

#[test]
fn run_reports_json_and_writes_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let snap = small_heat(dir.path(), "heat.ttoi");
    let pred = dir.path().join("pred.ttoi");
    let o = run(&["run", snap.to_str().unwrap(), "--method", "tt", "--problem", "heat", "--out", pred.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["method"], "tt");
    assert_eq!(report["status"], "ok");
    assert!(report["rel_error"].as_f64().unwrap() < 1e-2);
    assert!(report["ranks"].is_array());
    assert!(pred.exists());
    assert!(run(&["inspect", pred.to_str().unwrap()]).status.success());
}

#[test]
fn table_csv_has_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let snap = small_heat(dir.path(), "heat.ttoi");
    let o = run(&["table", snap.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6, "{text}");
    assert!(lines[0].starts_with("problem,method,status"));
    for (line, m) in lines[1..].iter().zip(["rom", "tt-rom", "ft", "tt", "qtt"]) {
        assert!(line.starts_with(&format!("heat,{m},ok,")), "{line}");
    }
}

#[test]
fn empty_table_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let snap = small_heat(dir.path(), "heat.ttoi");
    let o = run(&["table", snap.to_str().unwrap(), "--methods", "", "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let snap = small_heat(dir.path(), "heat.ttoi");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nproblem = heat\ngamma = 1e-3\nn_modes = 2\n").unwrap();
    let o = run(&["run", snap.to_str().unwrap(), "--method", "rom", "--config", cfg.to_str().unwrap(), "--n-modes", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(report["gamma"].as_f64(), Some(1e-3));
    assert_eq!(report["n_modes"].as_u64(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ttoi");
    let out = out.to_str().unwrap();

    // Usage errors.
    assert_eq!(run(&["generate", "heat", "--dt-snapshot", "0", "-o", out]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["run", out]).status.code(), Some(2));

    // Missing and malformed files.
    assert_eq!(run(&["inspect", dir.path().join("missing.ttoi").to_str().unwrap()]).status.code(), Some(4));
    let junk = dir.path().join("junk.ttoi");
    std::fs::write(&junk, b"not a snapshot file").unwrap();
    assert_eq!(run(&["inspect", junk.to_str().unwrap()]).status.code(), Some(4));

    // Invalid configuration for an existing file.
    let snap = small_heat(dir.path(), "heat.ttoi");
    let o = run(&["run", snap.to_str().unwrap(), "--method", "tt", "--eps-tt", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["run", snap.to_str().unwrap(), "--method", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
