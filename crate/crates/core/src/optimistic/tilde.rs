//! The implicit optimistic model whose extended actions
//! `ã = (a, s', Z_1..Z_d, z_1..z_ℓ)` pick an action, a direction state and
//! one consistent scope per factor.
//!
//! The value of `ã` at `s` is `r̃(s,ã) + Σ_{s'} Π_i q_i(s'_i) h(s')`. Rewards
//! separate across reward factors, so each `z_j` is maximized alone. The
//! transition part is multilinear in the per-factor rows `q_i`, which lets
//! the search keep only distinct rows and, for binary factors, only the two
//! extreme rows.

use std::sync::Arc;

use crate::error::{FmdpError, Result};
use crate::estimator::EmpiricalSnapshot;
use crate::planner::{EviResult, PlanningModel};
use crate::space::FactorSpace;
use crate::structure::ConsistentScopeSets;

use super::{optimistic_factor_row, optimistic_reward};

/// Default cap on the searched combinations per state.
pub const DEFAULT_TILDE_CAP: u128 = 10_000_000;
/// Largest `|S| |A|` for which per-pair candidates are precomputed.
pub const TILDE_PAIR_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TildeOptions {
    pub cap: u128,
    /// Restrict directions to the argmax state of the current bias.
    pub greedy_direction: bool,
}

impl Default for TildeOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_TILDE_CAP,
            greedy_direction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    row: Vec<f64>,
    zpos: usize,
    dir: usize,
}

#[derive(Debug, Clone)]
struct PairData {
    /// Distinct rows per factor, pruned.
    pruned: Vec<Vec<Candidate>>,
    /// Every (scope, direction) row per factor.
    all: Vec<Vec<Candidate>>,
    reward: f64,
    reward_pos: Vec<usize>,
}

/// Optimistic extended-action view over a snapshot and consistent sets.
#[derive(Debug, Clone)]
pub struct TildeView {
    snap: Arc<EmpiricalSnapshot>,
    sets: ConsistentScopeSets,
    state_space: FactorSpace,
    action_space: FactorSpace,
    opts: TildeOptions,
    pairs: Vec<PairData>,
    radices: Vec<usize>,
    num_extended: usize,
}

impl TildeView {
    pub fn build(
        snap: Arc<EmpiricalSnapshot>,
        sets: ConsistentScopeSets,
        state_space: &FactorSpace,
        action_space: &FactorSpace,
        opts: TildeOptions,
    ) -> Result<Self> {
        let d = state_space.num_factors();
        let family = snap.family().clone();
        let ns = state_space.cardinality();
        let na = action_space.cardinality();
        if sets.transition.len() != d || sets.reward.len() != snap.num_rewards() {
            return Err(FmdpError::Contract("consistent sets do not match the model".into()));
        }
        if ns.saturating_mul(na) > TILDE_PAIR_CAP {
            return Err(FmdpError::Size {
                what: "state-action pairs for the optimistic view".into(),
                needed: ns as u128 * na as u128,
                cap: TILDE_PAIR_CAP as u128,
            });
        }
        // effective search size: |A| times the candidate rows per factor
        let mut effective: u128 = na as u128;
        for (i, set) in sets.transition.iter().enumerate() {
            let w = state_space.size(i);
            let per = if w == 2 && !opts.greedy_direction {
                2u128.min(set.len() as u128 * 2)
            } else if opts.greedy_direction {
                set.len() as u128
            } else {
                set.len() as u128 * w as u128
            };
            effective = effective.saturating_mul(per);
        }
        if effective > opts.cap {
            return Err(FmdpError::Size {
                what: "extended-action combinations per state (see the greedy direction flag)".into(),
                needed: effective,
                cap: opts.cap,
            });
        }
        let mut radices = vec![na, ns];
        radices.extend(sets.transition.iter().map(Vec::len));
        radices.extend(sets.reward.iter().map(Vec::len));
        let num_extended = radices
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .ok_or_else(|| FmdpError::Size {
                what: "extended actions".into(),
                needed: u128::MAX,
                cap: usize::MAX as u128,
            })?;

        let joint = state_space.product(action_space)?;
        let mut x = vec![0; joint.num_factors()];
        let mut pairs = Vec::with_capacity(ns * na);
        for s in 0..ns {
            state_space.decode_into(s, &mut x[..d]);
            for a in 0..na {
                action_space.decode_into(a, &mut x[d..]);
                let mut all = Vec::with_capacity(d);
                let mut pruned = Vec::with_capacity(d);
                for (i, set) in sets.transition.iter().enumerate() {
                    let w_i = state_space.size(i);
                    let mut rows = Vec::new();
                    for (zpos, &z) in set.iter().enumerate() {
                        let cell = family.indexer(z).cell(&x);
                        for dir in 0..w_i {
                            rows.push(Candidate {
                                row: optimistic_factor_row(&snap, i, z, cell, dir),
                                zpos,
                                dir,
                            });
                        }
                    }
                    pruned.push(prune(&rows));
                    all.push(rows);
                }
                let mut reward = 0.0;
                let mut reward_pos = Vec::with_capacity(sets.reward.len());
                for (j, set) in sets.reward.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for (pos, &z) in set.iter().enumerate() {
                        let r = optimistic_reward(&snap, j, z, family.indexer(z).cell(&x));
                        if r > best {
                            best = r;
                            arg = pos;
                        }
                    }
                    reward += best;
                    reward_pos.push(arg);
                }
                reward /= sets.reward.len() as f64;
                pairs.push(PairData {
                    pruned,
                    all,
                    reward,
                    reward_pos,
                });
            }
        }
        Ok(Self {
            snap,
            sets,
            state_space: state_space.clone(),
            action_space: action_space.clone(),
            opts,
            pairs,
            radices,
            num_extended,
        })
    }

    pub fn snapshot(&self) -> &Arc<EmpiricalSnapshot> {
        &self.snap
    }

    pub fn sets(&self) -> &ConsistentScopeSets {
        &self.sets
    }

    pub fn state_space(&self) -> &FactorSpace {
        &self.state_space
    }

    pub fn action_space(&self) -> &FactorSpace {
        &self.action_space
    }

    /// `|Ã| = |A| |S| Π|𝒵_i| Π|ℛ_j|`.
    pub fn extended_action_count(&self) -> usize {
        self.num_extended
    }

    /// Mixed-radix digits `(a, s', Z positions.., z positions..)` of an extended action.
    pub fn decode_extended(&self, mut code: usize) -> Vec<usize> {
        self.radices
            .iter()
            .map(|&r| {
                let v = code % r;
                code /= r;
                v
            })
            .collect()
    }

    pub fn encode_extended(&self, digits: &[usize]) -> usize {
        let mut code = 0;
        let mut stride = 1;
        for (v, r) in digits.iter().zip(&self.radices) {
            code += v * stride;
            stride *= r;
        }
        code
    }

    /// Base action `a` of an extended action.
    pub fn base_action(&self, code: usize) -> usize {
        code % self.radices[0]
    }

    /// Optimistic row with a consistency check on the scope.
    pub fn factor_transition(&self, i: usize, z: usize, cell: usize, dir: usize) -> Result<Vec<f64>> {
        if !self.sets.transition[i].contains(&z) {
            return Err(FmdpError::Contract(format!(
                "scope {} is not consistent for factor {i}",
                self.snap.family().scope(z)
            )));
        }
        Ok(optimistic_factor_row(&self.snap, i, z, cell, dir))
    }

    /// Base-action policy from a solve of this view.
    pub fn policy_from(&self, result: &EviResult) -> Vec<usize> {
        result.policy.iter().map(|&c| self.base_action(c)).collect()
    }

    /// Best value and candidate choice for one (s, a) pair.
    fn search(&self, pair: &PairData, h: &[f64], greedy: Option<&[usize]>) -> (f64, Vec<usize>) {
        let d = self.state_space.num_factors();
        let filtered: Vec<Vec<Candidate>>;
        let lists: &[Vec<Candidate>] = match greedy {
            Some(dirs) => {
                filtered = pair
                    .all
                    .iter()
                    .enumerate()
                    .map(|(i, rows)| {
                        let keep: Vec<Candidate> = rows.iter().filter(|c| c.dir == dirs[i]).cloned().collect();
                        prune(&keep)
                    })
                    .collect();
                &filtered
            }
            None => &pair.pruned,
        };
        if d == 0 {
            return (h[0], Vec::new());
        }
        let mut bufs: Vec<Vec<f64>> = (0..d).map(|i| vec![0.0; self.state_space.stride(i)]).collect();
        let mut choice = vec![0; d];
        let mut best = (f64::NEG_INFINITY, vec![0; d]);
        self.descend(d - 1, h, lists, &mut bufs, &mut choice, &mut best);
        (best.0, best.1)
    }

    fn descend(
        &self,
        i: usize,
        t: &[f64],
        lists: &[Vec<Candidate>],
        bufs: &mut [Vec<f64>],
        choice: &mut [usize],
        best: &mut (f64, Vec<usize>),
    ) {
        let stride = self.state_space.stride(i);
        for (k, cand) in lists[i].iter().enumerate() {
            choice[i] = k;
            let (lower, upper) = bufs.split_at_mut(i);
            for (j, slot) in upper[0].iter_mut().enumerate() {
                *slot = cand.row.iter().enumerate().map(|(w, p)| p * t[j + w * stride]).sum();
            }
            let out = &upper[0];
            if i == 0 {
                if out[0] > best.0 {
                    best.0 = out[0];
                    best.1.copy_from_slice(choice);
                }
            } else {
                self.descend(i - 1, out, lists, lower, choice, best);
            }
        }
    }

    fn greedy_dirs(&self, h: &[f64]) -> Vec<usize> {
        let mut arg = 0;
        for (s, v) in h.iter().enumerate() {
            if *v > h[arg] {
                arg = s;
            }
        }
        self.state_space.decode(arg)
    }
}

/// Distinct rows, first occurrence kept; for two-valued factors only the
/// rows with the smallest and largest mass on value 1.
fn prune(rows: &[Candidate]) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    for c in rows {
        if !out.iter().any(|o| o.row == c.row) {
            out.push(c.clone());
        }
    }
    if out.first().is_some_and(|c| c.row.len() == 2) && out.len() > 2 {
        let mut lo = 0;
        let mut hi = 0;
        for (k, c) in out.iter().enumerate() {
            if c.row[1] < out[lo].row[1] {
                lo = k;
            }
            if c.row[1] > out[hi].row[1] {
                hi = k;
            }
        }
        let (a, b) = (lo.min(hi), lo.max(hi));
        out = if a == b { vec![out[a].clone()] } else { vec![out[a].clone(), out[b].clone()] };
    }
    out
}

impl PlanningModel for TildeView {
    fn num_states(&self) -> usize {
        self.state_space.cardinality()
    }

    fn num_actions(&self, _s: usize) -> usize {
        self.num_extended
    }

    fn reward(&self, s: usize, code: usize) -> f64 {
        let digits = self.decode_extended(code);
        let d = self.state_space.num_factors();
        let family = self.snap.family();
        let x = self.joint_tuple(s, digits[0]);
        let l = self.sets.reward.len();
        (0..l)
            .map(|j| {
                let z = self.sets.reward[j][digits[2 + d + j]];
                optimistic_reward(&self.snap, j, z, family.indexer(z).cell(&x))
            })
            .sum::<f64>()
            / l as f64
    }

    fn transitions(&self, s: usize, code: usize, out: &mut Vec<(usize, f64)>) {
        let digits = self.decode_extended(code);
        let d = self.state_space.num_factors();
        let family = self.snap.family();
        let x = self.joint_tuple(s, digits[0]);
        let dirs = self.state_space.decode(digits[1]);
        out.clear();
        out.push((0, 1.0));
        for i in 0..d {
            let z = self.sets.transition[i][digits[2 + i]];
            let row = optimistic_factor_row(&self.snap, i, z, family.indexer(z).cell(&x), dirs[i]);
            let stride = self.state_space.stride(i);
            let prev = std::mem::take(out);
            for (w, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                out.extend(prev.iter().map(|&(st, q)| (st + w * stride, q * p)));
            }
        }
    }

    fn backup(&self, s: usize, h: &[f64]) -> (f64, usize) {
        let na = self.action_space.cardinality();
        let d = self.state_space.num_factors();
        let greedy = self.opts.greedy_direction.then(|| self.greedy_dirs(h));
        let mut best = f64::NEG_INFINITY;
        let mut code = 0;
        for a in 0..na {
            let pair = &self.pairs[s * na + a];
            let (v, choice) = self.search(pair, h, greedy.as_deref());
            let q = pair.reward + v;
            if q > best {
                best = q;
                let lists = match &greedy {
                    Some(dirs) => pair
                        .all
                        .iter()
                        .enumerate()
                        .map(|(i, rows)| prune(&rows.iter().filter(|c| c.dir == dirs[i]).cloned().collect::<Vec<_>>()))
                        .collect::<Vec<_>>(),
                    None => pair.pruned.clone(),
                };
                let mut digits = vec![a, 0];
                let dirs: Vec<usize> = (0..d).map(|i| lists[i][choice[i]].dir).collect();
                digits[1] = self.state_space.encode_unchecked(&dirs);
                digits.extend((0..d).map(|i| lists[i][choice[i]].zpos));
                digits.extend(pair.reward_pos.iter().copied());
                code = self.encode_extended(&digits);
            }
        }
        (best, code)
    }
}

impl TildeView {
    fn joint_tuple(&self, s: usize, a: usize) -> Vec<usize> {
        let d = self.state_space.num_factors();
        let mut x = vec![0; d + self.action_space.num_factors()];
        self.state_space.decode_into(s, &mut x[..d]);
        self.action_space.decode_into(a, &mut x[d..]);
        x
    }
}

/// Plain enumeration of every extended action of a [`TildeView`], without
/// the structured search. Test oracle for tiny instances.
pub struct FullEnumeration<'a>(pub &'a TildeView);

impl PlanningModel for FullEnumeration<'_> {
    fn num_states(&self) -> usize {
        self.0.num_states()
    }

    fn num_actions(&self, s: usize) -> usize {
        self.0.num_actions(s)
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.0.reward(s, a)
    }

    fn transitions(&self, s: usize, a: usize, out: &mut Vec<(usize, f64)>) {
        self.0.transitions(s, a, out)
    }
}
