use std::fs;
use std::path::Path;

use fmdp_harness::aggregate::{aggregate_dir, AggregateRow, AGGREGATE_FILE};
use fmdp_harness::audit::{audit_dir, Outcome};
use fmdp_harness::experiment::{RunStatus, StepRow, MANIFEST_FILE};
use fmdp_harness::files::read_csv;
use fmdp_harness::plot::{render_plots, REGRET_SVG, WRONG_SCOPES_SVG};
use fmdp_harness::{run_experiment, RunConfig};

fn config(dir: &Path, agents: &[&str], horizon: u64, seeds: std::ops::Range<u64>) -> RunConfig {
    RunConfig {
        env: "sysadmin:circular:n=3".into(),
        agents: agents.iter().map(|a| a.parse().unwrap()).collect(),
        horizon,
        seeds: seeds.collect(),
        out_dir: dir.to_path_buf(),
        grid_points: 25,
        ..RunConfig::default()
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != MANIFEST_FILE {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn tiny_run_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(tmp.path(), &["slf-ucrl"], 10, 0..1)).unwrap();
    let steps: Vec<StepRow> = read_csv(&tmp.path().join("runs/slf-ucrl/seed-0/steps.csv")).unwrap();
    assert_eq!(steps.len(), 10);
    assert!(tmp.path().join(MANIFEST_FILE).exists());
    assert_eq!(report.manifest.files.len(), 4);
    assert!(report.lambda_star > 0.0 && report.lambda_star <= 1.0);
}

#[test]
fn regret_column_matches_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(tmp.path(), &["ucrl2"], 500, 3..4)).unwrap();
    let steps: Vec<StepRow> = read_csv(&tmp.path().join("runs/ucrl2/seed-3/steps.csv")).unwrap();
    let mut cum = 0.0;
    for s in &steps {
        cum += s.reward;
        assert!((report.lambda_star * s.t as f64 - cum - s.regret).abs() <= 1e-9);
    }
}

#[test]
fn reruns_and_parallel_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let agents = ["slf-ucrl2", "factored-ucrl", "ucrl2"];
    let mut serial = config(a.path(), &agents, 800, 0..4);
    run_experiment(&serial).unwrap();
    let first = fs::read(a.path().join(AGGREGATE_FILE)).unwrap();
    run_experiment(&serial).unwrap();
    assert_eq!(fs::read(a.path().join(AGGREGATE_FILE)).unwrap(), first);

    serial.out_dir = b.path().to_path_buf();
    serial.parallelism = 4;
    let par = run_experiment(&serial).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));
    assert_eq!(par.manifest.config_hash, serial.hash());
}

#[test]
fn aggregate_is_recomputable() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path(), &["slf-ucrl", "ucrl2"], 400, 0..3)).unwrap();
    let stored: Vec<AggregateRow> = read_csv(&tmp.path().join(AGGREGATE_FILE)).unwrap();
    assert_eq!(stored, aggregate_dir(tmp.path(), 25).unwrap());
    assert_eq!(stored.len(), 50);
    assert!(stored.iter().filter(|r| r.agent == "ucrl2").all(|r| r.wrong_mean.is_none()));
    assert!(stored.iter().filter(|r| r.agent == "slf-ucrl").all(|r| r.wrong_mean.is_some()));
}

#[test]
fn failed_runs_do_not_stop_siblings() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(tmp.path(), &["slf-ucrl9", "ucrl2"], 50, 0..2)).unwrap();
    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|r| r.agent == "slf-ucrl9"));
    assert_eq!(report.runs.iter().filter(|r| r.status == RunStatus::Ok).count(), 2);
    let audit = audit_dir(tmp.path()).unwrap();
    assert!(!audit.passed());
    assert_eq!(audit.find("slf-ucrl9", 0, "completed").unwrap().outcome, Outcome::Fail);
}

#[test]
fn invalid_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), &["ucrl2"], 10, 0..1);
    c.seeds = vec![2, 2];
    assert_eq!(run_experiment(&c).unwrap_err().exit_code(), 2);
    let mut c = config(tmp.path(), &["ucrl2"], 10, 0..1);
    c.env = "sysadmin:circular:n=1".into();
    assert_eq!(run_experiment(&c).unwrap_err().exit_code(), 2);
}

#[test]
fn plots_need_results() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(render_plots(tmp.path()).is_err());
    fs::write(tmp.path().join(AGGREGATE_FILE), "agent,t,runs,regret_mean,regret_se,wrong_mean,wrong_se\n").unwrap();
    assert!(render_plots(tmp.path()).is_err());
    fs::write(tmp.path().join(AGGREGATE_FILE), "agent,t\nucrl2,1\n").unwrap();
    assert!(render_plots(tmp.path()).is_err());
    assert!(!tmp.path().join(REGRET_SVG).exists());
    assert!(!tmp.path().join(WRONG_SCOPES_SVG).exists());
}

#[test]
fn single_seed_plot_has_flat_band() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path(), &["slf-ucrl", "factored-ucrl"], 300, 0..1)).unwrap();
    let stored: Vec<AggregateRow> = read_csv(&tmp.path().join(AGGREGATE_FILE)).unwrap();
    assert!(stored.iter().all(|r| r.regret_se == 0.0 && r.runs == 1));
    render_plots(tmp.path()).unwrap();
    let regret = fs::read_to_string(tmp.path().join(REGRET_SVG)).unwrap();
    assert!(regret.contains("SLF-UCRL3") && regret.contains("Factored-UCRL"));
    assert!(regret.contains("time steps") && regret.contains("cumulative regret"));
    let wrong = fs::read_to_string(tmp.path().join(WRONG_SCOPES_SVG)).unwrap();
    assert!(wrong.contains("SLF-UCRL3") && !wrong.contains("Factored-UCRL"));
}

#[test]
fn audits_of_clean_pinned_and_broken_runs() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path(), &["slf-ucrl", "slf-ucrl0", "ucrl2"], 2000, 0..10)).unwrap();
    let audit = audit_dir(tmp.path()).unwrap();
    for (agent, clean, total) in audit.clean_runs() {
        assert!(clean >= 9, "{agent}: {clean}/{total}\n{audit}");
    }
    for seed in 0..10 {
        assert_eq!(audit.find("slf-ucrl0", seed, "true-scope-survival").unwrap().outcome, Outcome::Pass);
    }

    let broken = tempfile::tempdir().unwrap();
    run_experiment(&config(broken.path(), &["slf-ucrl:radius=0.01"], 20_000, 0..2)).unwrap();
    let audit = audit_dir(broken.path()).unwrap();
    assert!(!audit.passed());
    assert!(audit.clean_runs().iter().all(|&(_, clean, _)| clean == 0), "{audit}");
    let dead = (0..2)
        .filter(|&s| audit.find("slf-ucrl:radius=0.01", s, "true-scope-survival").unwrap().outcome == Outcome::Fail)
        .count();
    assert!(dead >= 1, "{audit}");
}

#[test]
fn tampering_breaks_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path(), &["ucrl2"], 100, 0..2)).unwrap();
    assert!(audit_dir(tmp.path()).unwrap().passed());
    let p = tmp.path().join("runs/ucrl2/seed-1/steps.csv");
    let text = fs::read_to_string(&p).unwrap() + "\n";
    fs::write(&p, text).unwrap();
    let audit = audit_dir(tmp.path()).unwrap();
    assert!(audit.checks.iter().any(|c| c.name == "checksums" && c.outcome == Outcome::Fail));
}
