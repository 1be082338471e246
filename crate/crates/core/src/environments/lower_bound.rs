//! A factored MDP that embeds `d W^m` multi-armed bandits.
//!
//! Time runs in blocks of `log2 d + 2` steps driven by a counter. At counter 0
//! random location bits pick a window of `m` value factors, which receive
//! uniform values in `1..=W` (all other value factors read 0). At counter 1
//! the action is an arm of the bandit indexed by the window start and its
//! values; its outcome lands in that start's reward bit. A binary OR tree then
//! reduces the reward bits, and the reward is paid at counter `log2 d + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{Fmdp, RewardFactor, TransitionFactor};
use crate::space::{FactorSpace, Scope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub d: usize,
    pub w: usize,
    pub m: usize,
    pub arms: usize,
    /// Mean of the distinguished arm minus 0.5.
    pub gap: f64,
    /// Arm means per bandit, `means[bandit * arms + arm]`; drawn when absent.
    pub means: Option<Vec<f64>>,
}

impl LowerBoundConfig {
    pub fn new(d: usize, w: usize, m: usize, arms: usize) -> Self {
        Self {
            d,
            w,
            m,
            arms,
            gap: 0.1,
            means: None,
        }
    }

    pub fn num_bandits(&self) -> usize {
        self.d * self.w.pow(self.m as u32)
    }

    pub fn log_d(&self) -> usize {
        self.d.trailing_zeros() as usize
    }

    /// `log2 d + 2`.
    pub fn block_length(&self) -> usize {
        self.log_d() + 2
    }

    /// Bandit index of window start `i` with values `vals` (each in `1..=W`).
    pub fn bandit_index(&self, i: usize, vals: &[usize]) -> usize {
        let mut idx = 0;
        for &v in vals.iter().rev() {
            idx = idx * self.w + (v - 1);
        }
        i * self.w.pow(self.m as u32) + idx
    }

    /// One distinguished arm per bandit at `0.5 + gap`, the rest at 0.5.
    pub fn draw_means<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut means = vec![0.5; self.num_bandits() * self.arms];
        for b in 0..self.num_bandits() {
            let arm = rng.random_range(0..self.arms);
            means[b * self.arms + arm] = (0.5 + self.gap).min(1.0);
        }
        means
    }
}

/// Factor positions of a built lower-bound model.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundLayout {
    pub counter: usize,
    pub location: Vec<usize>,
    pub values: Vec<usize>,
    pub reward_bits: Vec<usize>,
    /// OR-tree levels, widest first; the last level has two bits.
    pub tree: Vec<Vec<usize>>,
    pub action: usize,
}

impl LowerBoundLayout {
    pub fn last_bits(&self) -> &[usize] {
        self.tree.last().unwrap_or(&self.reward_bits)
    }
}

/// Window start of the big-endian location bits.
pub fn window_start(loc_bits: &[usize]) -> usize {
    loc_bits.iter().fold(0, |acc, b| acc * 2 + b)
}

pub fn build_lower_bound<R: Rng + ?Sized>(cfg: &LowerBoundConfig, rng: &mut R) -> Result<(Fmdp, LowerBoundLayout)> {
    let d = cfg.d;
    if d < 2 || !d.is_power_of_two() {
        return domain(format!("d={d} must be a power of two >= 2"));
    }
    if cfg.m == 0 || cfg.m >= d || cfg.w == 0 || cfg.arms == 0 {
        return domain("need 0 < m < d, W >= 1 and at least one arm");
    }
    let means = match &cfg.means {
        Some(v) if v.len() == cfg.num_bandits() * cfg.arms => v.clone(),
        Some(_) => return domain("means table has the wrong length"),
        None => cfg.draw_means(rng),
    };
    if means.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return domain("arm means must lie in [0,1]");
    }
    let log_d = cfg.log_d();
    let block = log_d + 2;

    let mut sizes = vec![block];
    let counter = 0;
    let location: Vec<usize> = (0..log_d).map(|k| 1 + k).collect();
    sizes.extend(vec![2; log_d]);
    let values: Vec<usize> = (0..d).map(|i| sizes.len() + i).collect();
    sizes.extend(vec![cfg.w + 1; d]);
    let reward_bits: Vec<usize> = (0..d).map(|i| sizes.len() + i).collect();
    sizes.extend(vec![2; d]);
    let mut tree = Vec::new();
    let mut width = d / 2;
    while width >= 2 {
        tree.push((0..width).map(|k| sizes.len() + k).collect::<Vec<_>>());
        sizes.extend(vec![2; width]);
        width /= 2;
    }
    let states = FactorSpace::new(sizes)?;
    let actions = FactorSpace::new(vec![cfg.arms])?;
    let joint = states.product(&actions)?;
    let action = states.num_factors();
    let layout = LowerBoundLayout {
        counter,
        location: location.clone(),
        values: values.clone(),
        reward_bits: reward_bits.clone(),
        tree: tree.clone(),
        action,
    };

    let mut trans: Vec<TransitionFactor> = Vec::with_capacity(states.num_factors());
    trans.push(TransitionFactor::deterministic(&joint, Scope::new(vec![counter]), block, |x| {
        (x[counter] + 1) % block
    })?);
    for _ in &location {
        trans.push(TransitionFactor::from_fn(&joint, Scope::empty(), 2, |_| vec![0.5, 0.5])?);
    }
    for i in 0..d {
        let mut sc = vec![counter];
        sc.extend(&location);
        let location = &location;
        trans.push(TransitionFactor::from_fn(&joint, Scope::new(sc), cfg.w + 1, |x| {
            let mut row = vec![0.0; cfg.w + 1];
            let bits: Vec<usize> = location.iter().map(|&f| x[f]).collect();
            let start = window_start(&bits);
            if x[counter] == 0 && (i + d - start) % d < cfg.m {
                for slot in row.iter_mut().skip(1) {
                    *slot = 1.0 / cfg.w as f64;
                }
            } else {
                row[0] = 1.0;
            }
            row
        })?);
    }
    for i in 0..d {
        let win: Vec<usize> = (0..cfg.m).map(|p| values[(i + p) % d]).collect();
        let mut sc = win.clone();
        sc.push(action);
        let means = &means;
        trans.push(TransitionFactor::from_fn(&joint, Scope::new(sc), 2, |x| {
            let vals: Vec<usize> = win.iter().map(|&f| x[f]).collect();
            if vals.contains(&0) {
                return vec![1.0, 0.0];
            }
            let p = means[cfg.bandit_index(i, &vals) * cfg.arms + x[action]];
            vec![1.0 - p, p]
        })?);
    }
    let mut children = reward_bits.clone();
    for (lv, level) in tree.iter().enumerate() {
        for (k, _) in level.iter().enumerate() {
            let (a, b) = (children[2 * k], children[2 * k + 1]);
            // level lv+1 is computed while the counter reads lv+2
            trans.push(TransitionFactor::deterministic(&joint, Scope::new(vec![counter, a, b]), 2, |x| {
                usize::from(x[counter] == lv + 2 && (x[a] == 1 || x[b] == 1))
            })?);
        }
        children = level.clone();
    }
    let last = layout.last_bits().to_vec();
    let reward = RewardFactor::bernoulli_from_fn(
        &joint,
        Scope::new(vec![counter, last[0], last[1]]),
        |x| {
            if x[counter] == log_d + 1 && (x[last[0]] == 1 || x[last[1]] == 1) {
                1.0
            } else {
                0.0
            }
        },
    )?;
    let model = Fmdp::new(states, actions, trans, vec![reward])?;
    Ok((model, layout))
}

/// State at the start of a block with everything cleared.
pub fn lower_bound_initial_state() -> usize {
    0
}
