use std::path::Path;
use std::process::{Command, Output};

fn fmdp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmdp")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_plot_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fmdp(
        &["run", "--env", "sysadmin:star:n=3", "--agent", "slf-ucrl", "--agent", "ucrl2", "--horizon", "300", "--seeds", "0..2", "--out", "res", "--jobs", "2"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&fmdp(&["plot", "res"], tmp.path())), 0);
    assert!(tmp.path().join("res/regret.svg").exists());
    let o = fmdp(&["audit", "res"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("audit passed"));
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "horizon = 20\nagents = [\"ucrl2\"]\nseeds = [5]\nout_dir = \"from-file\"\n").unwrap();
    let o = fmdp(&["run", "--config", "c.toml", "--horizon", "999", "--out", "from-flag", "--env", "sysadmin:circular:n=2"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("from-file/runs/ucrl2/seed-5/steps.csv").exists());
    assert!(!tmp.path().join("from-flag").exists());
    let steps = std::fs::read_to_string(tmp.path().join("from-file/runs/ucrl2/seed-5/steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 21);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    assert_eq!(code(&fmdp(&["run", "--env", "sysadmin:ring:n=3", "--out", "x"], p)), 2);
    assert_eq!(code(&fmdp(&["run", "--seeds", "1,1", "--out", "x"], p)), 2);
    assert_eq!(code(&fmdp(&["run", "--agent", "sarsa", "--out", "x"], p)), 2);
    let o = fmdp(&["run", "--env", "sysadmin:circular:n=2", "--agent", "slf-ucrl5", "--agent", "ucrl2", "--horizon", "30", "--seeds", "0", "--out", "fail"], p);
    assert_eq!(code(&o), 3);
    assert!(p.join("fail/runs/ucrl2/seed-0/steps.csv").exists());
    assert_eq!(code(&fmdp(&["audit", "fail"], p)), 4);
    assert_eq!(code(&fmdp(&["plot", "missing"], p)), 3);
}

#[test]
fn gen_then_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let o = fmdp(&["gen", "sysadmin:circular:n=3", "--out", "m.toml"], tmp.path());
    assert_eq!(code(&o), 0);
    let o = fmdp(&["plan", "m.toml"], tmp.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    let gain: f64 = out.lines().next().unwrap().trim_start_matches("gain = ").parse().unwrap();
    assert!(gain > 0.5 && gain < 1.0);
    assert!(out.contains("policy = ["));
    assert_eq!(code(&fmdp(&["plan", "nope.toml"], tmp.path())), 3);
    assert_eq!(code(&fmdp(&["gen", "bogus"], tmp.path())), 2);
}
