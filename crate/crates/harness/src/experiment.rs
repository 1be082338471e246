//! Seeded runs of every (agent, seed) pair and their result files.
//!
//! Layout of a results directory:
//!
//! ```text
//! runs.csv                      one row per run
//! runs/<agent>/seed-<s>/steps.csv
//! runs/<agent>/seed-<s>/episodes.csv
//! aggregate.csv                 mean ± standard error on the time grid
//! manifest.toml                 written last
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fmdp_core::agents::{run, EpisodeLog, ProblemShape, RunOutput, Truth};
use fmdp_core::environments::BuiltEnv;
use fmdp_core::error::FmdpError;
use fmdp_core::planner::{evi_solve, exact_gain_brute_force, EviOptions};
use fmdp_core::Fmdp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_dir, AGGREGATE_FILE};
use crate::config::{AgentSpec, RunConfig};
use crate::error::{HarnessError, Result};
use crate::files::{csv_bytes, sha256_hex, write_atomic};

pub const RUNS_FILE: &str = "runs.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const STEPS_FILE: &str = "steps.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
const LAMBDA_TOL: f64 = 1e-8;

/// `λ*` of the true model: EVI at a tight tolerance, brute force as fallback.
pub fn optimal_gain(model: &Fmdp) -> Result<f64> {
    let flat = model.flatten()?;
    match evi_solve(&flat, &EviOptions::with_tol(LAMBDA_TOL)) {
        Ok(r) => Ok(r.gain),
        Err(_) => Ok(exact_gain_brute_force(&flat)?.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub t: u64,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    /// `λ* t − Σ_{u ≤ t} r^u`.
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub k: usize,
    pub t_k: u64,
    pub length: u64,
    pub gain: f64,
    pub eliminated: usize,
    pub transition_set_sizes: String,
    pub reward_set_sizes: String,
    pub concentration: Option<bool>,
    pub optimism_margin: Option<f64>,
    pub truth_alive: Option<bool>,
    pub wrong_transition: String,
    pub wrong_reward: String,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn split_list(s: &str) -> Result<Vec<usize>> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| HarnessError::Format(format!("bad list entry '{p}'"))))
        .collect()
}

impl From<&EpisodeLog> for EpisodeRow {
    fn from(e: &EpisodeLog) -> Self {
        let a = e.audit.as_ref();
        Self {
            k: e.k,
            t_k: e.t_k,
            length: e.length,
            gain: e.gain,
            eliminated: e.eliminated,
            transition_set_sizes: join(&e.transition_set_sizes),
            reward_set_sizes: join(&e.reward_set_sizes),
            concentration: a.map(|a| a.concentration),
            optimism_margin: a.map(|a| a.optimism_margin),
            truth_alive: a.map(|a| a.truth_alive),
            wrong_transition: a.map(|a| join(&a.wrong_transition)).unwrap_or_default(),
            wrong_reward: a.map(|a| join(&a.wrong_reward)).unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One line of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub agent: String,
    pub seed: u64,
    pub status: RunStatus,
    pub error_kind: String,
    pub error: String,
    pub dir: String,
    pub steps: u64,
    pub episodes: usize,
    pub episode_bound: u128,
    pub tracked_cells: u128,
    pub counters_consistent: bool,
    pub sets_monotone: bool,
    pub final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub agent: String,
    pub seed: u64,
    pub wall_seconds: f64,
    pub planning_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub lambda_star: f64,
    pub config: RunConfig,
    pub runs: Vec<RunTiming>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub lambda_star: f64,
    pub runs: Vec<RunRow>,
    pub manifest: RunManifest,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunRow> {
        self.runs.iter().filter(|r| r.status == RunStatus::Failed)
    }
}

fn error_kind(e: &HarnessError) -> &'static str {
    match e {
        HarnessError::Core(FmdpError::StructuralFault { .. }) => "structural-fault",
        HarnessError::Core(FmdpError::EpisodeBound { .. }) => "episode-bound",
        HarnessError::Core(FmdpError::Size { .. }) => "size",
        HarnessError::Core(FmdpError::NonConvergence { .. }) => "non-convergence",
        HarnessError::Core(FmdpError::Contract(_)) => "contract",
        _ => "error",
    }
}

/// Relative directory of one run.
pub fn run_dir(agent: &AgentSpec, seed: u64) -> String {
    let slug: String = agent
        .label()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("runs/{slug}/seed-{seed}")
}

fn simulate(env: &BuiltEnv, agent: &AgentSpec, cfg: &RunConfig, seed: u64, lambda_star: f64) -> Result<RunOutput> {
    let agent_cfg = agent.agent_config(env, cfg.delta)?;
    let mut sim = env.simulator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Truth {
        model: Arc::clone(&env.model),
        lambda_star,
    };
    Ok(run(&mut sim, &ProblemShape::of(&env.model), &agent_cfg, cfg.horizon, &mut rng, Some(truth))?)
}

fn write_run(dir: &Path, out: &RunOutput, lambda_star: f64) -> Result<f64> {
    let regret = out.regret_curve(lambda_star);
    let steps: Vec<StepRow> = out
        .steps
        .iter()
        .zip(&regret)
        .enumerate()
        .map(|(t, (s, &r))| StepRow {
            t: t as u64 + 1,
            state: s.state,
            action: s.action,
            reward: s.reward,
            regret: r,
        })
        .collect();
    let episodes: Vec<EpisodeRow> = out.episodes.iter().map(EpisodeRow::from).collect();
    write_atomic(&dir.join(STEPS_FILE), &csv_bytes(&steps)?)?;
    write_atomic(&dir.join(EPISODES_FILE), &csv_bytes(&episodes)?)?;
    Ok(regret.last().copied().unwrap_or(0.0))
}

fn run_one(
    env: &BuiltEnv,
    agent: &AgentSpec,
    cfg: &RunConfig,
    seed: u64,
    lambda_star: f64,
) -> (RunRow, RunTiming) {
    let clock = Instant::now();
    let rel = run_dir(agent, seed);
    let mut row = RunRow {
        agent: agent.label(),
        seed,
        status: RunStatus::Ok,
        error_kind: String::new(),
        error: String::new(),
        dir: rel.clone(),
        steps: 0,
        episodes: 0,
        episode_bound: 0,
        tracked_cells: 0,
        counters_consistent: false,
        sets_monotone: false,
        final_regret: 0.0,
    };
    let mut planning = 0.0;
    let result = simulate(env, agent, cfg, seed, lambda_star).and_then(|out| {
        let fin = write_run(&cfg.out_dir.join(&rel), &out, lambda_star)?;
        Ok((out, fin))
    });
    match result {
        Ok((out, fin)) => {
            row.steps = out.steps.len() as u64;
            row.episodes = out.episodes.len();
            row.episode_bound = out.episode_bound;
            row.tracked_cells = out.tracked_cells;
            row.counters_consistent = out.counters_consistent;
            row.sets_monotone = out.sets_monotone;
            row.final_regret = fin;
            planning = out.planning_seconds.iter().sum();
        }
        Err(e) => {
            row.status = RunStatus::Failed;
            row.error_kind = error_kind(&e).into();
            row.error = e.to_string();
        }
    }
    let timing = RunTiming {
        agent: row.agent.clone(),
        seed,
        wall_seconds: clock.elapsed().as_secs_f64(),
        planning_seconds: planning,
    };
    (row, timing)
}

/// Run every agent on every seed, then write the aggregate and the manifest.
///
/// A failing run is recorded in `runs.csv` and does not stop the others.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    let spec = cfg.validate()?;
    let env = spec.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let lambda_star = optimal_gain(&env.model)?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    // a stale manifest would vouch for files about to be replaced
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        std::fs::remove_file(&manifest_path).map_err(|e| HarnessError::io(&manifest_path, e))?;
    }

    let jobs: Vec<(&AgentSpec, u64)> = cfg
        .agents
        .iter()
        .flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<(RunRow, RunTiming)> =
        pool.install(|| jobs.par_iter().map(|&(a, s)| run_one(&env, a, cfg, s, lambda_star)).collect());
    let (runs, timings): (Vec<RunRow>, Vec<RunTiming>) = results.into_iter().unzip();

    write_atomic(&dir.join(RUNS_FILE), &csv_bytes(&runs)?)?;
    let agg = aggregate_dir(&dir, cfg.grid_points)?;
    write_atomic(&dir.join(AGGREGATE_FILE), &csv_bytes(&agg)?)?;

    let mut inventory = vec![RUNS_FILE.to_string(), AGGREGATE_FILE.to_string()];
    for r in runs.iter().filter(|r| r.status == RunStatus::Ok) {
        inventory.push(format!("{}/{STEPS_FILE}", r.dir));
        inventory.push(format!("{}/{EPISODES_FILE}", r.dir));
    }
    let files = inventory
        .into_iter()
        .map(|path| {
            let bytes = std::fs::read(dir.join(&path)).map_err(|e| HarnessError::io(dir.join(&path), e))?;
            Ok(FileEntry {
                sha256: sha256_hex(&bytes),
                path,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        lambda_star,
        config: cfg.clone(),
        runs: timings,
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Format(e.to_string()))?;
    write_atomic(&manifest_path, text.as_bytes())?;
    Ok(ExperimentReport {
        dir,
        lambda_star,
        runs,
        manifest,
    })
}
