//! Invariant checks over a results directory.
//!
//! Concentration violations are flagged, not failed: they are expected with
//! probability about `δ` per run.

use std::fmt;
use std::path::Path;

use crate::aggregate::{aggregate_dir, AggregateRow, AGGREGATE_FILE};
use crate::error::Result;
use crate::experiment::{
    split_list, EpisodeRow, RunManifest, RunRow, RunStatus, StepRow, EPISODES_FILE, RUNS_FILE, STEPS_FILE,
};
use crate::files::{read_csv, sha256_file};

pub const OPTIMISM_TOL: f64 = 1e-3;
pub const REGRET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Flag,
    Fail,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Flag => "FLAG",
            Outcome::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// `None` for directory-wide checks.
    pub run: Option<(String, u64)>,
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.run {
            Some((a, s)) => write!(f, "{} {a} seed={s} {}", self.outcome, self.name)?,
            None => write!(f, "{} * {}", self.outcome, self.name)?,
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    pub delta: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    /// Runs with no failing check, per agent: `(agent, clean, total)`.
    pub fn clean_runs(&self) -> Vec<(String, usize, usize)> {
        let mut out: Vec<(String, usize, usize)> = Vec::new();
        let mut seen: Vec<(String, u64)> = Vec::new();
        for c in &self.checks {
            if let Some(run) = &c.run {
                if !seen.contains(run) {
                    seen.push(run.clone());
                }
            }
        }
        for (agent, seed) in seen {
            let clean = self
                .checks
                .iter()
                .filter(|c| c.run.as_ref() == Some(&(agent.clone(), seed)))
                .all(|c| c.outcome != Outcome::Fail);
            match out.iter_mut().find(|(a, _, _)| *a == agent) {
                Some(e) => {
                    e.1 += usize::from(clean);
                    e.2 += 1;
                }
                None => out.push((agent, usize::from(clean), 1)),
            }
        }
        out
    }

    /// Runs whose concentration check was flagged, per agent.
    pub fn flagged(&self, name: &str) -> usize {
        self.checks
            .iter()
            .filter(|c| c.name == name && c.outcome == Outcome::Flag)
            .count()
    }

    pub fn find(&self, agent: &str, seed: u64, name: &str) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| c.name == name && c.run.as_ref().is_some_and(|(a, s)| a == agent && *s == seed))
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        for (agent, clean, total) in self.clean_runs() {
            writeln!(f, "{agent}: {clean}/{total} runs pass every check")?;
        }
        let flagged = self.flagged("concentration");
        writeln!(f, "concentration flagged in {flagged} run(s) (expected rate about {})", self.delta)?;
        write!(f, "{}", if self.passed() { "audit passed" } else { "audit FAILED" })
    }
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn audit_run(dir: &Path, run: &RunRow, lambda_star: f64) -> Result<Vec<Check>> {
    let id = Some((run.agent.clone(), run.seed));
    let mut out = Vec::new();
    let mut push = |name, outcome, detail: String| {
        out.push(Check {
            run: id.clone(),
            name,
            outcome,
            detail,
        })
    };
    if run.status == RunStatus::Failed {
        push("completed", Outcome::Fail, run.error.clone());
        if run.error_kind == "structural-fault" {
            push("true-scope-survival", Outcome::Fail, "a consistent set became empty".into());
        }
        return Ok(out);
    }
    let base = dir.join(&run.dir);
    let steps: Vec<StepRow> = read_csv(&base.join(STEPS_FILE))?;
    let episodes: Vec<EpisodeRow> = read_csv(&base.join(EPISODES_FILE))?;

    push(
        "episode-bound",
        verdict(run.episodes as u128 <= run.episode_bound && episodes.len() == run.episodes),
        format!("{} episodes, bound {}", run.episodes, run.episode_bound),
    );
    push("counters", verdict(run.counters_consistent), String::new());

    let mut monotone = run.sets_monotone;
    for pair in episodes.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (ta, tb) = (split_list(&a.transition_set_sizes)?, split_list(&b.transition_set_sizes)?);
        let (ra, rb) = (split_list(&a.reward_set_sizes)?, split_list(&b.reward_set_sizes)?);
        monotone &= ta.len() == tb.len() && ta.iter().zip(&tb).all(|(x, y)| y <= x);
        monotone &= ra.len() == rb.len() && ra.iter().zip(&rb).all(|(x, y)| y <= x);
    }
    push("scope-monotone", verdict(monotone), String::new());

    let mut cum = 0.0;
    let mut worst = 0.0f64;
    for s in &steps {
        cum += s.reward;
        worst = worst.max((lambda_star * s.t as f64 - cum - s.regret).abs());
    }
    push(
        "regret-recompute",
        verdict(worst <= REGRET_TOL && steps.len() as u64 == run.steps),
        format!("max deviation {worst:.2e}"),
    );

    let audited: Vec<&EpisodeRow> = episodes.iter().filter(|e| e.concentration.is_some()).collect();
    if audited.is_empty() {
        return Ok(out);
    }
    let dead = audited.iter().filter(|e| e.truth_alive == Some(false)).count();
    push(
        "true-scope-survival",
        verdict(dead == 0),
        if dead > 0 { format!("true scope eliminated in {dead} episode(s)") } else { String::new() },
    );
    let violations = audited.iter().filter(|e| e.concentration == Some(false)).count();
    push(
        "concentration",
        if violations == 0 { Outcome::Pass } else { Outcome::Flag },
        if violations > 0 { format!("{violations} episode(s) outside the confidence event") } else { String::new() },
    );
    let under: Vec<usize> = audited
        .iter()
        .filter(|e| e.concentration == Some(true) && e.optimism_margin.unwrap_or(0.0) < -OPTIMISM_TOL)
        .map(|e| e.k)
        .collect();
    let min_margin = audited
        .iter()
        .filter(|e| e.concentration == Some(true))
        .filter_map(|e| e.optimism_margin)
        .fold(f64::INFINITY, f64::min);
    push(
        "optimism",
        verdict(under.is_empty()),
        if under.is_empty() {
            format!("min margin {min_margin:.4}")
        } else {
            format!("gain below optimum in episodes {under:?}")
        },
    );
    Ok(out)
}

/// Audit every run in `dir`, plus checksums and the aggregate recomputation.
pub fn audit_dir(dir: &Path) -> Result<AuditReport> {
    let manifest = RunManifest::load(dir)?;
    let runs: Vec<RunRow> = read_csv(&dir.join(RUNS_FILE))?;
    let mut checks = Vec::new();

    let mismatched: Vec<String> = manifest
        .files
        .iter()
        .filter(|f| sha256_file(&dir.join(&f.path)).map(|h| h != f.sha256).unwrap_or(true))
        .map(|f| f.path.clone())
        .collect();
    checks.push(Check {
        run: None,
        name: "checksums",
        outcome: verdict(mismatched.is_empty()),
        detail: if mismatched.is_empty() {
            format!("{} files", manifest.files.len())
        } else {
            format!("mismatch: {}", mismatched.join(", "))
        },
    });
    let stored: Vec<AggregateRow> = read_csv(&dir.join(AGGREGATE_FILE))?;
    let fresh = aggregate_dir(dir, manifest.config.grid_points)?;
    checks.push(Check {
        run: None,
        name: "aggregate",
        outcome: verdict(stored == fresh),
        detail: String::new(),
    });

    for run in &runs {
        checks.extend(audit_run(dir, run, manifest.lambda_star)?);
    }
    Ok(AuditReport {
        checks,
        delta: manifest.config.delta,
    })
}
