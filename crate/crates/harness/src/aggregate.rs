//! Mean ± standard error across seeds, recomputed from per-run CSVs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{split_list, EpisodeRow, RunRow, RunStatus, StepRow, EPISODES_FILE, RUNS_FILE, STEPS_FILE};
use crate::files::read_csv;

pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub agent: String,
    pub t: u64,
    pub runs: usize,
    pub regret_mean: f64,
    pub regret_se: f64,
    /// Surviving wrong transition scopes, summed over factors.
    pub wrong_mean: Option<f64>,
    pub wrong_se: Option<f64>,
}

/// `⌈j T / p⌉` for `j = 1..=p`, `p = min(points, T)`.
pub fn time_grid(horizon: u64, points: usize) -> Vec<u64> {
    let p = (points as u64).min(horizon).max(1);
    let mut g: Vec<u64> = (1..=p).map(|j| (j * horizon).div_ceil(p)).collect();
    g.dedup();
    g
}

/// Sample mean and standard error; the error is 0 for a single value.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct RunSeries {
    regret: Vec<f64>,
    /// `(t_k, wrong scopes)` per episode, when audited.
    wrong: Option<Vec<(u64, f64)>>,
}

fn load_series(dir: &Path, run: &RunRow) -> Result<RunSeries> {
    let base = dir.join(&run.dir);
    let steps: Vec<StepRow> = read_csv(&base.join(STEPS_FILE))?;
    let episodes: Vec<EpisodeRow> = read_csv(&base.join(EPISODES_FILE))?;
    let audited = episodes.iter().all(|e| !e.wrong_transition.is_empty()) && !episodes.is_empty();
    let wrong = if audited {
        Some(
            episodes
                .iter()
                .map(|e| Ok((e.t_k, split_list(&e.wrong_transition)?.iter().sum::<usize>() as f64)))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(RunSeries {
        regret: steps.into_iter().map(|s| s.regret).collect(),
        wrong,
    })
}

fn wrong_at(eps: &[(u64, f64)], t: u64) -> f64 {
    let k = eps.partition_point(|&(tk, _)| tk <= t);
    eps[k.saturating_sub(1)].1
}

/// Aggregate rows for every agent with at least one successful run, in
/// order of first appearance in `runs.csv`.
pub fn aggregate_dir(dir: &Path, grid_points: usize) -> Result<Vec<AggregateRow>> {
    let runs: Vec<RunRow> = read_csv(&dir.join(RUNS_FILE))?;
    let mut agents: Vec<String> = Vec::new();
    for r in &runs {
        if r.status == RunStatus::Ok && !agents.contains(&r.agent) {
            agents.push(r.agent.clone());
        }
    }
    let mut rows = Vec::new();
    for agent in agents {
        let series = runs
            .iter()
            .filter(|r| r.agent == agent && r.status == RunStatus::Ok)
            .map(|r| load_series(dir, r))
            .collect::<Result<Vec<_>>>()?;
        let horizon = series[0].regret.len();
        if horizon == 0 || series.iter().any(|s| s.regret.len() != horizon) {
            return Err(HarnessError::Format(format!("runs of {agent} have unequal or empty trajectories")));
        }
        let audited = series.iter().all(|s| s.wrong.is_some());
        for t in time_grid(horizon as u64, grid_points) {
            let regrets: Vec<f64> = series.iter().map(|s| s.regret[t as usize - 1]).collect();
            let (regret_mean, regret_se) = mean_se(&regrets);
            let (wrong_mean, wrong_se) = if audited {
                let w: Vec<f64> = series.iter().map(|s| wrong_at(s.wrong.as_ref().unwrap(), t)).collect();
                let (m, se) = mean_se(&w);
                (Some(m), Some(se))
            } else {
                (None, None)
            };
            rows.push(AggregateRow {
                agent: agent.clone(),
                t,
                runs: series.len(),
                regret_mean,
                regret_se,
                wrong_mean,
                wrong_se,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        assert_eq!(time_grid(10, 200), (1..=10).collect::<Vec<_>>());
        assert_eq!(time_grid(30_000, 3), vec![10_000, 20_000, 30_000]);
        assert_eq!(*time_grid(7, 3).last().unwrap(), 7);
    }

    #[test]
    fn stats() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wrong_lookup() {
        let eps = [(1, 5.0), (10, 3.0), (40, 0.0)];
        assert_eq!(wrong_at(&eps, 1), 5.0);
        assert_eq!(wrong_at(&eps, 39), 3.0);
        assert_eq!(wrong_at(&eps, 40), 0.0);
    }
}
