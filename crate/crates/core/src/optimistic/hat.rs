//! Explicit factored optimistic model with stretched time.
//!
//! One original step becomes `L + 2` steps, `L = log2(n_pad)` where `n_pad`
//! is the number of state-action factors padded to a power of two with
//! size-one dummies. A counter runs `0..=L+1`:
//!
//! * counter 0: the agent picks the original action together with one
//!   direction and one scope per transition factor and one scope per reward
//!   factor; these are latched into choice factors, and level 0 of every
//!   work-space copy latches the full tuple `x`.
//! * counter `l` in `1..=L`: level `l` of each copy keeps one of every two
//!   entries of level `l - 1`, selected by bit `l - 1` of the position of the
//!   chosen scope's `p`-th factor.
//! * counter `L + 1`: each leaf holds one entry of the chosen scope's cell;
//!   state factors move by the optimistic row and the reward is paid.
//!
//! There are `m` copies per transition factor and per reward factor. The
//! leaf of the first copy of each reward factor also carries the chosen
//! reward scope, which keeps reward scopes at `m + 1`.

use std::sync::Arc;

use crate::error::{FmdpError, Result};
use crate::estimator::EmpiricalSnapshot;
use crate::model::{Fmdp, RewardFactor, TransitionFactor};
use crate::planner::{evi_solve, EviOptions};
use crate::space::{FactorSpace, Scope};
use crate::structure::ConsistentScopeSets;
use crate::tabular::{reachable_flatten, ReachableModel};

use super::{optimistic_factor_row, optimistic_reward};

/// Default cap on reachable stretched states.
pub const DEFAULT_HAT_CAP: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Owner {
    Transition(usize),
    Reward(usize),
}

#[derive(Debug, Clone)]
struct Copy_ {
    owner: Owner,
    pos: usize,
    /// Hat factor index of every entry, per level.
    levels: Vec<Vec<usize>>,
}

/// The stretched explicit model and the bookkeeping to map back.
#[derive(Debug, Clone)]
pub struct HatModel {
    model: Fmdp,
    orig_states: FactorSpace,
    orig_actions: FactorSpace,
    levels: usize,
    counter: usize,
    set_sizes: Vec<usize>,
    reward_set_sizes: Vec<usize>,
}

/// Solution of a [`HatModel`] restricted to block starts.
#[derive(Debug, Clone, PartialEq)]
pub struct HatSolution {
    /// Per-step gain of the stretched model.
    pub gain: f64,
    /// Hat action chosen at each original state's block start.
    pub hat_actions: Vec<usize>,
    /// Original action extracted from `hat_actions`.
    pub policy: Vec<usize>,
    pub reachable_states: usize,
}

impl HatModel {
    pub fn build(
        snap: Arc<EmpiricalSnapshot>,
        sets: &ConsistentScopeSets,
        state_space: &FactorSpace,
        action_space: &FactorSpace,
    ) -> Result<Self> {
        let family = snap.family().clone();
        let d = state_space.num_factors();
        let na_f = action_space.num_factors();
        let n = d + na_f;
        let l = sets.reward.len();
        let orig_joint = state_space.product(action_space)?;
        let n_pad = n.next_power_of_two().max(2);
        let levels = n_pad.trailing_zeros() as usize;
        let last = levels + 1;
        let m = sets
            .transition
            .iter()
            .chain(&sets.reward)
            .flatten()
            .map(|&z| family.scope(z).len())
            .max()
            .unwrap_or(1)
            .max(1);
        let orig_size = |k: usize| if k < n { orig_joint.size(k) } else { 1 };

        // state factor layout
        let mut sizes: Vec<usize> = state_space.sizes().to_vec();
        let counter = sizes.len();
        sizes.push(levels + 2);
        let choice0 = sizes.len();
        for (i, set) in sets.transition.iter().enumerate() {
            sizes.push(state_space.size(i) * set.len());
        }
        let rchoice0 = sizes.len();
        for set in &sets.reward {
            sizes.push(set.len());
        }
        let mut copies = Vec::new();
        let owners: Vec<Owner> = (0..d).map(Owner::Transition).chain((0..l).map(Owner::Reward)).collect();
        for &owner in &owners {
            for pos in 0..m {
                let mut lv_idx = Vec::new();
                let mut width: Vec<usize> = (0..n_pad).map(orig_size).collect();
                for lv in 0..=levels {
                    if lv > 0 {
                        width = width.chunks(2).map(|c| c[0].max(c[1])).collect();
                    }
                    let mut idx = Vec::new();
                    for &w in &width {
                        idx.push(sizes.len());
                        let size = match owner {
                            Owner::Reward(j) if pos == 0 && lv == levels => w * sets.reward[j].len(),
                            _ => w,
                        };
                        sizes.push(size);
                    }
                    lv_idx.push(idx);
                }
                copies.push(Copy_ { owner, pos, levels: lv_idx });
            }
        }
        let hat_states = FactorSpace::new(sizes.clone())?;
        let ns_f = sizes.len();

        // action layout: original, directions, transition scopes, reward scopes
        let mut asizes: Vec<usize> = action_space.sizes().to_vec();
        asizes.extend(state_space.sizes());
        asizes.extend(sets.transition.iter().map(Vec::len));
        asizes.extend(sets.reward.iter().map(Vec::len));
        let hat_actions = FactorSpace::new(asizes)?;
        let joint = hat_states.product(&hat_actions)?;
        let act = |k: usize| ns_f + k;
        let dir_act = |i: usize| ns_f + na_f + i;
        let scope_act = |i: usize| ns_f + na_f + d + i;
        let rscope_act = |j: usize| ns_f + na_f + 2 * d + j;

        // the orig factor a copy selects at position pos of scope z
        let pick = |z: &Scope, pos: usize| z.indices()[pos.min(z.len() - 1)];
        let copy_scope = |owner: Owner, choice: usize| -> Scope {
            match owner {
                Owner::Transition(i) => {
                    let wi = state_space.size(i);
                    family.scope(sets.transition[i][choice / wi]).clone()
                }
                Owner::Reward(j) => family.scope(sets.reward[j][choice]).clone(),
            }
        };
        let owner_choice = |owner: Owner| match owner {
            Owner::Transition(i) => choice0 + i,
            Owner::Reward(j) => rchoice0 + j,
        };

        let mut trans: Vec<Option<TransitionFactor>> = vec![None; ns_f];
        // original state factors
        for i in 0..d {
            let wi = state_space.size(i);
            let leaves: Vec<usize> = copies
                .iter()
                .filter(|c| c.owner == Owner::Transition(i))
                .map(|c| c.levels[levels][0])
                .collect();
            let mut sc = vec![i, counter, choice0 + i];
            sc.extend(&leaves);
            let set = &sets.transition[i];
            let snap = &snap;
            let family = &family;
            trans[i] = Some(TransitionFactor::from_fn(&joint, Scope::new(sc), wi, |x| {
                let mut row = vec![0.0; wi];
                if x[counter] != last {
                    row[x[i]] = 1.0;
                    return row;
                }
                let ch = x[choice0 + i];
                let (dir, zpos) = (ch % wi, ch / wi);
                let z = set[zpos];
                let ix = family.indexer(z);
                let vals: Vec<usize> = (0..ix.scope().len()).map(|p| x[leaves[p]]).collect();
                if vals.iter().zip(ix.radices()).any(|(v, r)| v >= r) {
                    row[x[i]] = 1.0;
                    return row;
                }
                optimistic_factor_row(snap, i, z, ix.cell_of_values(&vals), dir)
            })?);
        }
        trans[counter] = Some(TransitionFactor::deterministic(
            &joint,
            Scope::new(vec![counter]),
            levels + 2,
            |x| (x[counter] + 1) % (levels + 2),
        )?);
        for i in 0..d {
            let f = choice0 + i;
            let wi = state_space.size(i);
            trans[f] = Some(TransitionFactor::deterministic(
                &joint,
                Scope::new(vec![counter, f, dir_act(i), scope_act(i)]),
                sizes[f],
                |x| match x[counter] {
                    0 => x[dir_act(i)] + wi * x[scope_act(i)],
                    c if c == last => 0,
                    _ => x[f],
                },
            )?);
        }
        for j in 0..l {
            let f = rchoice0 + j;
            trans[f] = Some(TransitionFactor::deterministic(
                &joint,
                Scope::new(vec![counter, f, rscope_act(j)]),
                sizes[f],
                |x| match x[counter] {
                    0 => x[rscope_act(j)],
                    c if c == last => 0,
                    _ => x[f],
                },
            )?);
        }
        for c in &copies {
            for (k, &f) in c.levels[0].iter().enumerate() {
                let (scope, src) = if k < d {
                    (vec![counter, k], Some(k))
                } else if k < n {
                    (vec![counter, act(k - d)], Some(act(k - d)))
                } else {
                    (vec![], None)
                };
                trans[f] = Some(TransitionFactor::deterministic(&joint, Scope::new(scope), sizes[f], |x| {
                    match src {
                        Some(s) if x[counter] == 0 => x[s],
                        _ => 0,
                    }
                })?);
            }
            let ch = owner_choice(c.owner);
            for lv in 1..=levels {
                for (k, &f) in c.levels[lv].iter().enumerate() {
                    let (lo, hi) = (c.levels[lv - 1][2 * k], c.levels[lv - 1][2 * k + 1]);
                    let packs = matches!(c.owner, Owner::Reward(_)) && c.pos == 0 && lv == levels;
                    let width = if packs {
                        sizes[f] / sizes[rchoice0 + match c.owner {
                            Owner::Reward(j) => j,
                            Owner::Transition(_) => unreachable!(),
                        }]
                    } else {
                        sizes[f]
                    };
                    trans[f] = Some(TransitionFactor::deterministic(
                        &joint,
                        Scope::new(vec![counter, lo, hi, ch]),
                        sizes[f],
                        |x| {
                            if x[counter] != lv {
                                return 0;
                            }
                            let z = copy_scope(c.owner, x[ch]);
                            let bit = (pick(&z, c.pos) >> (lv - 1)) & 1;
                            let v = if bit == 0 { x[lo] } else { x[hi] };
                            let v = v.min(width - 1);
                            if packs {
                                v + width * x[ch]
                            } else {
                                v
                            }
                        },
                    )?);
                }
            }
        }
        let transitions: Vec<TransitionFactor> = trans.into_iter().map(|t| t.expect("every factor built")).collect();

        let mut rewards = Vec::with_capacity(l);
        for j in 0..l {
            let leaves: Vec<usize> = copies
                .iter()
                .filter(|c| c.owner == Owner::Reward(j))
                .map(|c| c.levels[levels][0])
                .collect();
            let mut sc = vec![counter];
            sc.extend(&leaves);
            let width = sizes[leaves[0]] / sets.reward[j].len();
            let set = &sets.reward[j];
            let snap = &snap;
            let family = &family;
            rewards.push(RewardFactor::bernoulli_from_fn(&joint, Scope::new(sc), |x| {
                if x[counter] != last {
                    return 0.0;
                }
                let packed = x[leaves[0]];
                let (v0, rc) = (packed % width, packed / width);
                let z = set[rc];
                let ix = family.indexer(z);
                let mut vals = vec![v0];
                vals.extend((1..ix.scope().len()).map(|p| x[leaves[p]]));
                if vals.iter().zip(ix.radices()).any(|(v, r)| v >= r) {
                    return 0.0;
                }
                optimistic_reward(snap, j, z, ix.cell_of_values(&vals))
            })?);
        }
        let model = Fmdp::new(hat_states, hat_actions, transitions, rewards)?;
        Ok(Self {
            model,
            orig_states: state_space.clone(),
            orig_actions: action_space.clone(),
            levels,
            counter,
            set_sizes: sets.transition.iter().map(Vec::len).collect(),
            reward_set_sizes: sets.reward.iter().map(Vec::len).collect(),
        })
    }

    pub fn model(&self) -> &Fmdp {
        &self.model
    }

    /// `L + 2` steps per original step.
    pub fn stretch_length(&self) -> usize {
        self.levels + 2
    }

    pub fn counter_factor(&self) -> usize {
        self.counter
    }

    pub fn max_transition_scope(&self) -> usize {
        self.model.transitions().iter().map(|t| t.scope.len()).max().unwrap_or(0)
    }

    pub fn max_reward_scope(&self) -> usize {
        self.model.rewards().iter().map(|r| r.scope.len()).max().unwrap_or(0)
    }

    /// Hat state `(s, 0, ⊥)` for original state `s`.
    pub fn start_state(&self, s: usize) -> usize {
        let d = self.orig_states.num_factors();
        let mut x = vec![0; self.model.num_state_factors()];
        self.orig_states.decode_into(s, &mut x[..d]);
        self.model.state_space().encode_unchecked(&x)
    }

    /// `(a, directions, scope positions, reward scope positions)` of a hat action.
    pub fn decode_action(&self, hat_action: usize) -> (usize, Vec<usize>, Vec<usize>, Vec<usize>) {
        let na_f = self.orig_actions.num_factors();
        let d = self.orig_states.num_factors();
        let t = self.model.action_space().decode(hat_action);
        let a = self.orig_actions.encode_unchecked(&t[..na_f]);
        let dirs = t[na_f..na_f + d].to_vec();
        let zs = t[na_f + d..na_f + 2 * d].to_vec();
        let rs = t[na_f + 2 * d..].to_vec();
        debug_assert_eq!(zs.len(), self.set_sizes.len());
        debug_assert_eq!(rs.len(), self.reward_set_sizes.len());
        (a, dirs, zs, rs)
    }

    /// Reachable expansion from every block start.
    pub fn reachable(&self, cap: usize) -> Result<ReachableModel> {
        let starts: Vec<usize> = (0..self.orig_states.cardinality()).map(|s| self.start_state(s)).collect();
        reachable_flatten(&self.model, &starts, cap)
    }

    pub fn solve(&self, opts: &EviOptions, cap: usize) -> Result<HatSolution> {
        let reach = self.reachable(cap)?;
        let res = evi_solve(&reach.mdp, opts)?;
        let mut hat_actions = Vec::new();
        let mut policy = Vec::new();
        for s in 0..self.orig_states.cardinality() {
            let id = *reach
                .index
                .get(&self.start_state(s))
                .ok_or_else(|| FmdpError::Contract("block start not reachable".into()))?;
            let label = reach.mdp.states[id][res.policy[id]].label;
            hat_actions.push(label);
            policy.push(self.decode_action(label).0);
        }
        Ok(HatSolution {
            gain: res.gain,
            hat_actions,
            policy,
            reachable_states: reach.mdp.num_states(),
        })
    }
}
