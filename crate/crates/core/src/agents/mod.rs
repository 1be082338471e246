//! Online learning loops.
//!
//! Every algorithm is a [`Learner`] driven by [`run`]: at each episode start
//! the learner plans a stationary policy, which is followed until the cell
//! about to be visited has doubled its count.

pub mod audit;
mod scoped;
mod ucrl2;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::environments::Environment;
use crate::error::{FmdpError, Result};
use crate::model::{Fmdp, StepRecord};
use crate::optimistic::hat::DEFAULT_HAT_CAP;
use crate::optimistic::tilde::DEFAULT_TILDE_CAP;
use crate::planner::{EviOptions, DEFAULT_EVI_TOL};
use crate::space::{FactorSpace, Scope};
use crate::structure::ScopePins;

pub use scoped::ScopedLearner;
pub use ucrl2::{Ucrl2Learner, Ucrl2View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SlfUcrl,
    FactoredUcrl,
    Ucrl2,
    NfaDorl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::SlfUcrl,
        Algorithm::FactoredUcrl,
        Algorithm::Ucrl2,
        Algorithm::NfaDorl,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::SlfUcrl => "slf-ucrl",
            Algorithm::FactoredUcrl => "factored-ucrl",
            Algorithm::Ucrl2 => "ucrl2",
            Algorithm::NfaDorl => "nfa-dorl",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = FmdpError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| FmdpError::Format(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub delta: f64,
    pub m: usize,
    /// Multiplier on every confidence radius.
    pub radius_scale: f64,
    /// Multiplier on the `2ε` elimination threshold only.
    pub threshold_scale: f64,
    pub pins: ScopePins,
    pub evi_tol: f64,
    /// Cap on extended-action combinations searched per state.
    pub tilde_cap: u128,
    /// Cap on flattened or reachable state counts.
    pub flatten_cap: usize,
    /// Only consider the bias-argmax direction per factor.
    pub greedy_direction: bool,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm, m: usize, pins: ScopePins) -> Self {
        Self {
            algorithm,
            delta: 0.01,
            m,
            radius_scale: 1.0,
            threshold_scale: 1.0,
            pins,
            evi_tol: DEFAULT_EVI_TOL,
            tilde_cap: DEFAULT_TILDE_CAP,
            flatten_cap: DEFAULT_HAT_CAP,
            greedy_direction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(FmdpError::Domain(format!("delta={} must lie in (0,1)", self.delta)));
        }
        if self.m == 0 {
            return Err(FmdpError::Domain("m must be at least 1".into()));
        }
        if !(self.radius_scale >= 0.0) || !(self.threshold_scale > 0.0) {
            return Err(FmdpError::Domain("radius scale must be >= 0 and threshold scale > 0".into()));
        }
        if !(self.evi_tol > 0.0) {
            return Err(FmdpError::Domain("EVI tolerance must be positive".into()));
        }
        let known = self.pins.transition.iter().chain(&self.pins.reward).all(Option::is_some);
        if matches!(self.algorithm, Algorithm::FactoredUcrl | Algorithm::NfaDorl) && !known {
            return Err(FmdpError::Contract(format!("{} needs every scope pinned", self.algorithm)));
        }
        Ok(())
    }

    pub(crate) fn evi(&self) -> EviOptions {
        EviOptions::with_tol(self.evi_tol)
    }
}

/// Pins for the variant that learns the scopes of the first `learned`
/// transition factors and knows the rest; reward scopes are pinned when
/// `pin_rewards` is set.
pub fn graded_pins(learned: usize, transition: &[Scope], reward: &[Scope], pin_rewards: bool) -> ScopePins {
    ScopePins {
        transition: transition
            .iter()
            .enumerate()
            .map(|(i, z)| (i >= learned).then(|| z.clone()))
            .collect(),
        reward: reward.iter().map(|z| pin_rewards.then(|| z.clone())).collect(),
    }
}

/// Spaces the learner is told about in advance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemShape {
    pub state_space: FactorSpace,
    pub action_space: FactorSpace,
    pub num_rewards: usize,
}

impl ProblemShape {
    pub fn of(model: &Fmdp) -> Self {
        Self {
            state_space: model.state_space().clone(),
            action_space: model.action_space().clone(),
            num_rewards: model.num_reward_factors(),
        }
    }
}

/// The true model and its optimal gain, used only for audits.
#[derive(Debug, Clone)]
pub struct Truth {
    pub model: Arc<Fmdp>,
    pub lambda_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub k: usize,
    pub t_k: u64,
    /// Optimistic gain `λ^k` in original-process units.
    pub gain: f64,
    pub transition_set_sizes: Vec<usize>,
    pub reward_set_sizes: Vec<usize>,
    pub eliminated: usize,
    pub length: u64,
    pub audit: Option<EpisodeAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeAudit {
    /// Every estimate of a scope containing the true scope lies within its radius.
    pub concentration: bool,
    /// `λ^k − λ*`.
    pub optimism_margin: f64,
    pub truth_alive: bool,
    pub wrong_transition: Vec<usize>,
    pub wrong_reward: Vec<usize>,
}

/// One step as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub steps: Vec<StepSummary>,
    pub episodes: Vec<EpisodeLog>,
    /// `Σ_Z |X[Z]|` over the cells that can end an episode.
    pub tracked_cells: u128,
    pub episode_bound: u128,
    /// Counter sums agreed after every episode roll.
    pub counters_consistent: bool,
    /// Consistent sets never grew.
    pub sets_monotone: bool,
    /// Planning wall time per episode, in seconds.
    pub planning_seconds: Vec<f64>,
}

impl RunOutput {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// `Σ_{u ≤ t} (λ* − r^u)` for every `t`.
    pub fn regret_curve(&self, lambda_star: f64) -> Vec<f64> {
        let mut acc = 0.0;
        self.steps
            .iter()
            .map(|s| {
                acc += lambda_star - s.reward;
                acc
            })
            .collect()
    }

    pub fn regret_at(&self, lambda_star: f64, t: usize) -> f64 {
        let t = t.min(self.steps.len());
        lambda_star * t as f64 - self.steps[..t].iter().map(|s| s.reward).sum::<f64>()
    }
}

/// What a learner commits to for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodePlan {
    pub gain: f64,
    pub policy: Vec<usize>,
    pub transition_set_sizes: Vec<usize>,
    pub reward_set_sizes: Vec<usize>,
    pub eliminated: usize,
    pub audit: Option<EpisodeAudit>,
}

pub trait Learner {
    /// Fold the finished episode into the totals and plan the next one.
    fn start_episode(&mut self, k: usize) -> Result<EpisodePlan>;
    /// Doubling guard on the cell about to be visited.
    fn triggered(&self, state: usize, action: usize) -> bool;
    fn observe(&mut self, step: &StepRecord);
    fn tracked_cells(&self) -> u128;
    fn counters_consistent(&self) -> bool;
    fn sets_monotone(&self) -> bool;
}

/// `Σ|X[Z]| (log2 T + 1)`.
pub fn episode_bound(tracked_cells: u128, horizon: u64) -> u128 {
    (tracked_cells as f64 * ((horizon.max(1) as f64).log2() + 1.0)).floor() as u128
}

pub fn make_learner(shape: &ProblemShape, config: &AgentConfig, truth: Option<Truth>) -> Result<Box<dyn Learner>> {
    config.validate()?;
    Ok(match config.algorithm {
        Algorithm::SlfUcrl | Algorithm::FactoredUcrl | Algorithm::NfaDorl => {
            Box::new(ScopedLearner::new(shape, config, truth)?)
        }
        Algorithm::Ucrl2 => Box::new(Ucrl2Learner::new(shape, config, truth)?),
    })
}

/// Run `horizon` steps of the configured algorithm against `env`.
pub fn run(
    env: &mut dyn Environment,
    shape: &ProblemShape,
    config: &AgentConfig,
    horizon: u64,
    rng: &mut dyn RngCore,
    truth: Option<Truth>,
) -> Result<RunOutput> {
    if horizon == 0 {
        return Err(FmdpError::Domain("horizon must be at least 1".into()));
    }
    let mut learner = make_learner(shape, config, truth)?;
    run_learner(learner.as_mut(), config.algorithm, env, horizon, rng)
}

pub fn run_learner(
    learner: &mut dyn Learner,
    algorithm: Algorithm,
    env: &mut dyn Environment,
    horizon: u64,
    rng: &mut dyn RngCore,
) -> Result<RunOutput> {
    env.reset();
    let mut steps = Vec::with_capacity(horizon as usize);
    let mut episodes = Vec::new();
    let mut planning_seconds = Vec::new();
    let mut t = 0u64;
    while t < horizon {
        let k = episodes.len() + 1;
        let clock = Instant::now();
        let plan = learner.start_episode(k)?;
        planning_seconds.push(clock.elapsed().as_secs_f64());
        let t_k = t + 1;
        let mut length = 0;
        while t < horizon {
            let s = env.state();
            let a = plan.policy[s];
            if length > 0 && learner.triggered(s, a) {
                break;
            }
            let rec = env.step(a, rng);
            steps.push(StepSummary {
                state: rec.state,
                action: rec.action,
                reward: rec.reward(),
            });
            learner.observe(&rec);
            t += 1;
            length += 1;
        }
        episodes.push(EpisodeLog {
            k,
            t_k,
            gain: plan.gain.clamp(0.0, 1.0),
            transition_set_sizes: plan.transition_set_sizes,
            reward_set_sizes: plan.reward_set_sizes,
            eliminated: plan.eliminated,
            length,
            audit: plan.audit,
        });
    }
    let tracked_cells = learner.tracked_cells();
    let bound = episode_bound(tracked_cells, horizon);
    if episodes.len() as u128 > bound {
        return Err(FmdpError::EpisodeBound {
            episodes: episodes.len(),
            bound,
        });
    }
    Ok(RunOutput {
        algorithm,
        horizon,
        steps,
        episodes,
        tracked_cells,
        episode_bound: bound,
        counters_consistent: learner.counters_consistent(),
        sets_monotone: learner.sets_monotone(),
        planning_seconds,
    })
}
