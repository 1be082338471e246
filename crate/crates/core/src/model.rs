//! Factored MDP models: per-factor transition tables and reward factors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FmdpError, Result};
use crate::space::{FactorSpace, Scope, ScopeIndexer};
use crate::tabular::TabularMdp;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default cap on `|S| * |A|` when flattening.
pub const DEFAULT_FLATTEN_CAP: usize = 1 << 22;

/// `P_i(. | x[Z_i])` stored row-major: `probs[cell * size_i + w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionFactor {
    pub scope: Scope,
    pub probs: Vec<f64>,
}

/// Distribution of one reward factor per cell of its scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardTable {
    Bernoulli {
        means: Vec<f64>,
    },
    /// Discrete distribution over a grid in [0,1]; `probs[cell * support.len() + k]`.
    Discrete {
        support: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl RewardTable {
    pub fn cells(&self) -> usize {
        match self {
            RewardTable::Bernoulli { means } => means.len(),
            RewardTable::Discrete { support, probs } => probs.len() / support.len().max(1),
        }
    }

    pub fn mean(&self, cell: usize) -> f64 {
        match self {
            RewardTable::Bernoulli { means } => means[cell],
            RewardTable::Discrete { support, probs } => {
                let k = support.len();
                support
                    .iter()
                    .zip(&probs[cell * k..(cell + 1) * k])
                    .map(|(v, p)| v * p)
                    .sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> f64 {
        match self {
            RewardTable::Bernoulli { means } => {
                let p = means[cell];
                // draw even for degenerate means so the rng stream does not depend on values
                let u: f64 = rng.random();
                if u < p {
                    1.0
                } else {
                    0.0
                }
            }
            RewardTable::Discrete { support, probs } => {
                let k = support.len();
                let idx = sample_index(&probs[cell * k..(cell + 1) * k], rng);
                support[idx]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardFactor {
    pub scope: Scope,
    pub table: RewardTable,
}

impl TransitionFactor {
    /// Table built cell by cell; `row` receives a full tuple over `joint` that
    /// agrees with the cell on the scope and is zero elsewhere.
    pub fn from_fn(
        joint: &FactorSpace,
        scope: Scope,
        size: usize,
        mut row: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        let idx = ScopeIndexer::new(joint, &scope)?;
        let mut probs = Vec::with_capacity(idx.cells() * size);
        let mut x = vec![0; joint.num_factors()];
        for cell in 0..idx.cells() {
            for (f, v) in scope.iter().zip(idx.values(cell)) {
                x[f] = v;
            }
            let r = row(&x);
            if r.len() != size {
                return Err(FmdpError::InvalidModel(format!(
                    "row of length {} for a factor of size {size}",
                    r.len()
                )));
            }
            probs.extend(r);
        }
        Ok(Self { scope, probs })
    }

    /// Deterministic factor `s'_i = f(x)`.
    pub fn deterministic(
        joint: &FactorSpace,
        scope: Scope,
        size: usize,
        mut f: impl FnMut(&[usize]) -> usize,
    ) -> Result<Self> {
        Self::from_fn(joint, scope, size, |x| {
            let mut r = vec![0.0; size];
            r[f(x)] = 1.0;
            r
        })
    }
}

impl RewardFactor {
    /// Bernoulli reward factor with means from `mean`, tuples built as in
    /// [`TransitionFactor::from_fn`].
    pub fn bernoulli_from_fn(
        joint: &FactorSpace,
        scope: Scope,
        mut mean: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let idx = ScopeIndexer::new(joint, &scope)?;
        let mut x = vec![0; joint.num_factors()];
        let means = (0..idx.cells())
            .map(|cell| {
                for (f, v) in scope.iter().zip(idx.values(cell)) {
                    x[f] = v;
                }
                mean(&x)
            })
            .collect();
        Ok(Self {
            scope,
            table: RewardTable::Bernoulli { means },
        })
    }
}

/// One environment transition as observed by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub reward_factors: Vec<f64>,
    pub next_state: usize,
    pub time: u64,
}

impl StepRecord {
    /// Total reward: the mean of the reward factors.
    pub fn reward(&self) -> f64 {
        if self.reward_factors.is_empty() {
            0.0
        } else {
            self.reward_factors.iter().sum::<f64>() / self.reward_factors.len() as f64
        }
    }
}

/// A factored MDP over `X = S × A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fmdp {
    state_space: FactorSpace,
    action_space: FactorSpace,
    joint: FactorSpace,
    transitions: Vec<TransitionFactor>,
    rewards: Vec<RewardFactor>,
    trans_index: Vec<ScopeIndexer>,
    reward_index: Vec<ScopeIndexer>,
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding: fall back to the last value with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

impl Fmdp {
    pub fn new(
        state_space: FactorSpace,
        action_space: FactorSpace,
        transitions: Vec<TransitionFactor>,
        rewards: Vec<RewardFactor>,
    ) -> Result<Self> {
        let joint = state_space.product(&action_space)?;
        let d = state_space.num_factors();
        if transitions.len() != d {
            return Err(FmdpError::InvalidModel(format!(
                "{} transition factors for {} state factors",
                transitions.len(),
                d
            )));
        }
        if rewards.is_empty() {
            return Err(FmdpError::InvalidModel("at least one reward factor is required".into()));
        }
        let mut trans_index = Vec::with_capacity(d);
        for (i, tf) in transitions.iter().enumerate() {
            let idx = ScopeIndexer::new(&joint, &tf.scope)?;
            let w = state_space.size(i);
            if tf.probs.len() != idx.cells() * w {
                return Err(FmdpError::InvalidModel(format!(
                    "transition factor {i}: table has {} entries, expected {}",
                    tf.probs.len(),
                    idx.cells() * w
                )));
            }
            for (cell, row) in tf.probs.chunks(w).enumerate() {
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(0.0..=1.0 + ROW_SUM_TOL).contains(&p))
                    || (sum - 1.0).abs() > ROW_SUM_TOL
                {
                    return Err(FmdpError::InvalidModel(format!(
                        "transition factor {i}, cell {cell}: row {row:?} is not a distribution"
                    )));
                }
            }
            trans_index.push(idx);
        }
        let mut reward_index = Vec::with_capacity(rewards.len());
        for (j, rf) in rewards.iter().enumerate() {
            let idx = ScopeIndexer::new(&joint, &rf.scope)?;
            if rf.table.cells() != idx.cells() {
                return Err(FmdpError::InvalidModel(format!(
                    "reward factor {j}: table has {} cells, expected {}",
                    rf.table.cells(),
                    idx.cells()
                )));
            }
            match &rf.table {
                RewardTable::Bernoulli { means } => {
                    if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                        return Err(FmdpError::InvalidModel(format!(
                            "reward factor {j}: mean outside [0,1]"
                        )));
                    }
                }
                RewardTable::Discrete { support, probs } => {
                    if support.is_empty() || support.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(FmdpError::InvalidModel(format!(
                            "reward factor {j}: support must be non-empty and inside [0,1]"
                        )));
                    }
                    for row in probs.chunks(support.len()) {
                        if (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL
                            || row.iter().any(|&p| p < 0.0)
                        {
                            return Err(FmdpError::InvalidModel(format!(
                                "reward factor {j}: row {row:?} is not a distribution"
                            )));
                        }
                    }
                }
            }
            reward_index.push(idx);
        }
        Ok(Self {
            state_space,
            action_space,
            joint,
            transitions,
            rewards,
            trans_index,
            reward_index,
        })
    }

    pub fn state_space(&self) -> &FactorSpace {
        &self.state_space
    }

    pub fn action_space(&self) -> &FactorSpace {
        &self.action_space
    }

    /// The state-action space `X = S × A`.
    pub fn joint_space(&self) -> &FactorSpace {
        &self.joint
    }

    pub fn num_state_factors(&self) -> usize {
        self.state_space.num_factors()
    }

    pub fn num_reward_factors(&self) -> usize {
        self.rewards.len()
    }

    pub fn num_states(&self) -> usize {
        self.state_space.cardinality()
    }

    pub fn num_actions(&self) -> usize {
        self.action_space.cardinality()
    }

    pub fn transitions(&self) -> &[TransitionFactor] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[RewardFactor] {
        &self.rewards
    }

    pub fn transition_scopes(&self) -> Vec<Scope> {
        self.transitions.iter().map(|t| t.scope.clone()).collect()
    }

    pub fn reward_scopes(&self) -> Vec<Scope> {
        self.rewards.iter().map(|r| r.scope.clone()).collect()
    }

    /// Largest transition or reward scope.
    pub fn max_scope_size(&self) -> usize {
        self.transitions
            .iter()
            .map(|t| t.scope.len())
            .chain(self.rewards.iter().map(|r| r.scope.len()))
            .max()
            .unwrap_or(0)
    }

    /// Joint tuple `x = (s, a)`.
    pub fn joint_tuple(&self, state: usize, action: usize) -> Vec<usize> {
        let mut x = vec![0; self.joint.num_factors()];
        self.fill_joint(state, action, &mut x);
        x
    }

    pub fn fill_joint(&self, state: usize, action: usize, x: &mut [usize]) {
        let d = self.state_space.num_factors();
        self.state_space.decode_into(state, &mut x[..d]);
        self.action_space.decode_into(action, &mut x[d..]);
    }

    /// `P_i(. | x[Z_i])` for the full tuple x.
    pub fn factor_row(&self, i: usize, x: &[usize]) -> &[f64] {
        let w = self.state_space.size(i);
        let cell = self.trans_index[i].cell(x);
        &self.transitions[i].probs[cell * w..(cell + 1) * w]
    }

    pub fn factor_prob(&self, i: usize, x: &[usize], w: usize) -> f64 {
        self.factor_row(i, x)[w]
    }

    pub fn reward_mean_factor(&self, j: usize, x: &[usize]) -> f64 {
        self.rewards[j].table.mean(self.reward_index[j].cell(x))
    }

    /// `r(x) = (1/ℓ) Σ_j r_j(x[Z_j])`.
    pub fn reward_mean(&self, x: &[usize]) -> f64 {
        let l = self.rewards.len() as f64;
        (0..self.rewards.len())
            .map(|j| self.reward_mean_factor(j, x))
            .sum::<f64>()
            / l
    }

    /// Next-state distribution over all of S for tuple x.
    pub fn next_state_distribution(&self, x: &[usize]) -> Vec<f64> {
        let mut dist = vec![1.0];
        for i in 0..self.state_space.num_factors() {
            let row = self.factor_row(i, x);
            let len = dist.len();
            let mut next = vec![0.0; len * row.len()];
            for (w, &p) in row.iter().enumerate() {
                for j in 0..len {
                    next[j + w * len] = dist[j] * p;
                }
            }
            dist = next;
        }
        dist
    }

    /// Sparse next-state support `(state, prob)` with zero entries dropped.
    pub fn next_state_support(&self, x: &[usize]) -> Vec<(usize, f64)> {
        let mut dist: Vec<(usize, f64)> = vec![(0, 1.0)];
        for i in 0..self.state_space.num_factors() {
            let stride = self.state_space.stride(i);
            let row = self.factor_row(i, x);
            let mut next = Vec::with_capacity(dist.len());
            for (w, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for &(s, q) in &dist {
                    next.push((s + w * stride, q * p));
                }
            }
            dist = next;
        }
        dist
    }

    /// Draw `s' ~ P(. | s, a)` factor by factor and one sample per reward factor.
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: usize,
        time: u64,
        rng: &mut R,
    ) -> StepRecord {
        let x = self.joint_tuple(state, action);
        let mut next = 0;
        for i in 0..self.state_space.num_factors() {
            let w = sample_index(self.factor_row(i, &x), rng);
            next += w * self.state_space.stride(i);
        }
        let reward_factors = self
            .rewards
            .iter()
            .zip(&self.reward_index)
            .map(|(rf, idx)| rf.table.sample(idx.cell(&x), rng))
            .collect();
        StepRecord {
            state,
            action,
            reward_factors,
            next_state: next,
            time,
        }
    }

    /// Dense tabular form `P(s'|s,a) = Π_i P_i(s'[i] | x[Z_i])`.
    pub fn flatten(&self) -> Result<TabularMdp> {
        self.flatten_with_cap(DEFAULT_FLATTEN_CAP)
    }

    pub fn flatten_with_cap(&self, cap: usize) -> Result<TabularMdp> {
        let ns = self.num_states();
        let na = self.num_actions();
        let pairs = ns as u128 * na as u128;
        if pairs > cap as u128 {
            return Err(FmdpError::Size {
                what: "flattened state-action pairs".into(),
                needed: pairs,
                cap: cap as u128,
            });
        }
        let mut p = Vec::with_capacity(ns * na * ns);
        let mut r = Vec::with_capacity(ns * na);
        let mut x = vec![0; self.joint.num_factors()];
        for s in 0..ns {
            for a in 0..na {
                self.fill_joint(s, a, &mut x);
                p.extend(self.next_state_distribution(&x));
                r.push(self.reward_mean(&x));
            }
        }
        TabularMdp::new(ns, na, p, r)
    }
}
