//! Stretched models for non-factored action spaces.
//!
//! One original step takes `d + 2` steps over the state
//! `(s, counter, stored action, w_1..w_d, bit)` with a single action factor
//! of size `max{|A|, W}`:
//!
//! * counter 0: the action is an original action, latched and rewarded;
//! * counter `i + 1`: the action is a direction for factor `i`, and `w_i`
//!   is drawn from that factor's (optimistic) row;
//! * counter `d + 1`: `s ← w` and the bit is reset.
//!
//! An action outside the legal range for the current counter clears the bit,
//! earns nothing and otherwise acts like value 0.

use std::sync::Arc;

use crate::error::{FmdpError, Result};
use crate::estimator::EmpiricalSnapshot;
use crate::model::{Fmdp, RewardFactor, TransitionFactor};
use crate::planner::{evi_solve, EviOptions};
use crate::space::{FactorSpace, Scope};
use crate::tabular::reachable_flatten;

use super::{optimistic_factor_row, optimistic_reward};

/// Source of rows and rewards for the stretched construction.
enum Source<'a> {
    Optimistic {
        snap: &'a EmpiricalSnapshot,
        trans_ids: &'a [usize],
        reward_ids: &'a [usize],
    },
    Truth(&'a Fmdp),
}

impl Source<'_> {
    fn row(&self, i: usize, x: &[usize], dir: usize) -> Vec<f64> {
        match self {
            Source::Optimistic { snap, trans_ids, .. } => {
                let z = trans_ids[i];
                optimistic_factor_row(snap, i, z, snap.family().indexer(z).cell(x), dir)
            }
            Source::Truth(m) => m.factor_row(i, x).to_vec(),
        }
    }

    fn reward(&self, j: usize, x: &[usize]) -> f64 {
        match self {
            Source::Optimistic { snap, reward_ids, .. } => {
                let z = reward_ids[j];
                optimistic_reward(snap, j, z, snap.family().indexer(z).cell(x))
            }
            Source::Truth(m) => m.reward_mean_factor(j, x),
        }
    }
}

/// A stretched model together with its layout.
#[derive(Debug, Clone)]
pub struct NfaModel {
    model: Fmdp,
    state_space: FactorSpace,
    num_actions: usize,
}

/// Gain and block-start policy of an [`NfaModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct NfaSolution {
    /// Per-step gain of the stretched model.
    pub gain: f64,
    pub policy: Vec<usize>,
}

/// Optimistic stretched model from a snapshot whose family contains the
/// given scope ids (one per transition factor and per reward factor).
pub fn build_nfa_optimistic(
    snap: Arc<EmpiricalSnapshot>,
    state_space: &FactorSpace,
    num_actions: usize,
    trans_ids: &[usize],
    reward_ids: &[usize],
) -> Result<NfaModel> {
    let scopes_t: Vec<Scope> = trans_ids.iter().map(|&z| snap.family().scope(z).clone()).collect();
    let scopes_r: Vec<Scope> = reward_ids.iter().map(|&z| snap.family().scope(z).clone()).collect();
    build(
        &Source::Optimistic {
            snap: &snap,
            trans_ids,
            reward_ids,
        },
        state_space,
        num_actions,
        &scopes_t,
        &scopes_r,
    )
}

/// The reference model `M'`: the same stretched process with the true dynamics.
pub fn build_m_prime(model: &Fmdp) -> Result<NfaModel> {
    if model.action_space().num_factors() != 1 {
        return Err(FmdpError::Contract("stretched models need a single action factor".into()));
    }
    build(
        &Source::Truth(model),
        model.state_space(),
        model.num_actions(),
        &model.transition_scopes(),
        &model.reward_scopes(),
    )
}

fn build(
    src: &Source,
    state_space: &FactorSpace,
    num_actions: usize,
    trans_scopes: &[Scope],
    reward_scopes: &[Scope],
) -> Result<NfaModel> {
    let d = state_space.num_factors();
    // original joint: state factors then the action at index d
    let state_part = |z: &Scope| -> Vec<usize> { z.iter().filter(|&f| f < d).collect() };

    let mut sizes: Vec<usize> = state_space.sizes().to_vec();
    let counter = sizes.len();
    sizes.push(d + 2);
    let stored = sizes.len();
    sizes.push(num_actions);
    let w0 = sizes.len();
    sizes.extend(state_space.sizes());
    let bit = sizes.len();
    sizes.push(2);
    let nsf = sizes.len();
    let act_size = num_actions.max(state_space.max_factor_size());
    let hat_states = FactorSpace::new(sizes.clone())?;
    let hat_actions = FactorSpace::new(vec![act_size])?;
    let joint = hat_states.product(&hat_actions)?;
    let act = nsf;
    let last = d + 1;

    // original tuple x = (s, a) from a stretched tuple, with a = stored action
    let orig = |x: &[usize], a: usize| -> Vec<usize> {
        let mut o = x[..d].to_vec();
        o.push(a);
        o
    };

    let mut trans = Vec::with_capacity(nsf);
    for i in 0..d {
        trans.push(TransitionFactor::deterministic(
            &joint,
            Scope::new(vec![i, counter, w0 + i]),
            sizes[i],
            |x| if x[counter] == last { x[w0 + i] } else { x[i] },
        )?);
    }
    trans.push(TransitionFactor::deterministic(&joint, Scope::new(vec![counter]), d + 2, |x| {
        (x[counter] + 1) % (d + 2)
    })?);
    trans.push(TransitionFactor::deterministic(
        &joint,
        Scope::new(vec![counter, stored, act]),
        num_actions,
        |x| match x[counter] {
            0 if x[act] < num_actions => x[act],
            0 => 0,
            c if c == last => 0,
            _ => x[stored],
        },
    )?);
    for i in 0..d {
        let wi = state_space.size(i);
        let mut sc = vec![w0 + i, counter, stored, act];
        sc.extend(state_part(&trans_scopes[i]));
        trans.push(TransitionFactor::from_fn(&joint, Scope::new(sc), wi, |x| {
            let c = x[counter];
            let mut row = vec![0.0; wi];
            if c == i + 1 {
                let dir = if x[act] < wi { x[act] } else { 0 };
                return src.row(i, &orig(x, x[stored]), dir);
            }
            row[if c == last { 0 } else { x[w0 + i] }] = 1.0;
            row
        })?);
    }
    trans.push(TransitionFactor::deterministic(
        &joint,
        Scope::new(vec![bit, counter, act]),
        2,
        |x| {
            let c = x[counter];
            if c == last {
                return 1;
            }
            let legal = if c == 0 {
                x[act] < num_actions
            } else {
                x[act] < state_space.size(c - 1)
            };
            usize::from(x[bit] == 1 && legal)
        },
    )?);

    let mut rewards = Vec::with_capacity(reward_scopes.len());
    for (j, z) in reward_scopes.iter().enumerate() {
        let mut sc = vec![counter, act];
        sc.extend(state_part(z));
        rewards.push(RewardFactor::bernoulli_from_fn(&joint, Scope::new(sc), |x| {
            if x[counter] != 0 || x[act] >= num_actions {
                return 0.0;
            }
            src.reward(j, &orig(x, x[act]))
        })?);
    }
    let model = Fmdp::new(hat_states, hat_actions, trans, rewards)?;
    Ok(NfaModel {
        model,
        state_space: state_space.clone(),
        num_actions,
    })
}

impl NfaModel {
    pub fn model(&self) -> &Fmdp {
        &self.model
    }

    /// `d + 2`.
    pub fn stretch_length(&self) -> usize {
        self.state_space.num_factors() + 2
    }

    pub fn action_size(&self) -> usize {
        self.model.num_actions()
    }

    pub fn bit_factor(&self) -> usize {
        self.model.num_state_factors() - 1
    }

    pub fn counter_factor(&self) -> usize {
        self.state_space.num_factors()
    }

    /// `(s, 0, 0, 0.., 1)`.
    pub fn start_state(&self, s: usize) -> usize {
        let d = self.state_space.num_factors();
        let mut x = vec![0; self.model.num_state_factors()];
        self.state_space.decode_into(s, &mut x[..d]);
        x[self.bit_factor()] = 1;
        self.model.state_space().encode_unchecked(&x)
    }

    pub fn solve(&self, opts: &EviOptions, cap: usize) -> Result<NfaSolution> {
        let starts: Vec<usize> = (0..self.state_space.cardinality()).map(|s| self.start_state(s)).collect();
        let reach = reachable_flatten(&self.model, &starts, cap)?;
        let res = evi_solve(&reach.mdp, opts)?;
        let policy = starts
            .iter()
            .map(|st| {
                let id = reach.index[st];
                let a = reach.mdp.states[id][res.policy[id]].label;
                a.min(self.num_actions - 1)
            })
            .collect();
        Ok(NfaSolution { gain: res.gain, policy })
    }
}
