use std::path::Path;
use std::process::{Command, Output};

fn slfv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slfv")).args(args).current_dir(cwd).env_remove("SLFV_OUT_DIR").output().unwrap()
}

const TRAJ: &str = "kind = trajectory\nn = 85\nside = 10\nu = 0.4\nhorizon = 5\nsamples = 5\nlog = true\nw0_amplitude = 0.3\n";

#[test]
fn run_then_replay() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("t.cfg"), TRAJ).unwrap();
    let out = slfv(&["run", "t.cfg", "--seed", "9", "--out", "run", "--threads", "1"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(tmp.path().join("run/manifest.txt")).unwrap();
    assert!(manifest.contains("status = complete") && manifest.contains("seeds = 9"));
    let out = slfv(&["replay", "run/events.log"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bitwise identical"));

    // a config that no longer matches the log is refused
    let cfg = tmp.path().join("run/config.txt");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("u = 0.4", "u = 0.41");
    std::fs::write(&cfg, text).unwrap();
    let out = slfv(&["replay", "run/events.log"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn check_reports_effective_config_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("t.cfg"), TRAJ).unwrap();
    let out = slfv(&["check", "t.cfg"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("u = 0.4") && text.contains("config_hash = "));

    std::fs::write(tmp.path().join("bad.cfg"), "kind = trajectory\nsede = 3\nu = 2\n").unwrap();
    let out = slfv(&["check", "bad.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("unknown key"), "{err}");
}

#[test]
fn stochastic_run_needs_seed() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("t.cfg"), TRAJ).unwrap();
    let out = slfv(&["run", "t.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}
