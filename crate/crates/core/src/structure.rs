//! Consistent-scope sets and their elimination.
//!
//! A size-m scope `Z` stays consistent for transition factor `i` while, for
//! every size-m `Z'`, every cell `v` of `Z ∪ Z'` and every value `w`,
//!
//! ```text
//! |P̄_{i,Z∪Z'}(w|v) − P̄_{i,Z}(w|v[Z])| ≤ 2 ε_{i,Z∪Z'}(w|v)
//! ```
//!
//! and likewise for reward factors with the Hoeffding radius.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FmdpError, Result};
use crate::estimator::{EmpiricalSnapshot, ScopeFamily};
use crate::space::Scope;

/// Known scopes fixed in advance, per transition and reward factor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScopePins {
    pub transition: Vec<Option<Scope>>,
    pub reward: Vec<Option<Scope>>,
}

impl ScopePins {
    pub fn none(d: usize, l: usize) -> Self {
        Self {
            transition: vec![None; d],
            reward: vec![None; l],
        }
    }

    pub fn all(transition: &[Scope], reward: &[Scope]) -> Self {
        Self {
            transition: transition.iter().cloned().map(Some).collect(),
            reward: reward.iter().cloned().map(Some).collect(),
        }
    }

    /// Every pinned scope, for inclusion in the tracked family.
    pub fn scopes(&self) -> Vec<Scope> {
        self.transition
            .iter()
            .chain(&self.reward)
            .flatten()
            .cloned()
            .collect()
    }
}

/// Surviving scope ids (into a [`ScopeFamily`]) per transition and reward factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistentScopeSets {
    pub transition: Vec<Vec<usize>>,
    pub reward: Vec<Vec<usize>>,
    pinned_transition: Vec<bool>,
    pinned_reward: Vec<bool>,
}

/// Scopes removed in one elimination pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EliminationReport {
    pub transition: Vec<Vec<usize>>,
    pub reward: Vec<Vec<usize>>,
}

impl EliminationReport {
    pub fn removed(&self) -> usize {
        self.transition.iter().chain(&self.reward).map(Vec::len).sum()
    }
}

impl ConsistentScopeSets {
    /// All size-m candidates for unpinned factors, the pin otherwise.
    pub fn initial(family: &ScopeFamily, pins: &ScopePins) -> Result<Self> {
        let lookup = |z: &Scope| {
            family
                .id(z)
                .ok_or_else(|| FmdpError::Contract(format!("pinned scope {z} is not tracked")))
        };
        let mut transition = Vec::new();
        let mut pinned_transition = Vec::new();
        for pin in &pins.transition {
            match pin {
                Some(z) => {
                    transition.push(vec![lookup(z)?]);
                    pinned_transition.push(true);
                }
                None => {
                    transition.push(family.base().to_vec());
                    pinned_transition.push(false);
                }
            }
        }
        let mut reward = Vec::new();
        let mut pinned_reward = Vec::new();
        for pin in &pins.reward {
            match pin {
                Some(z) => {
                    reward.push(vec![lookup(z)?]);
                    pinned_reward.push(true);
                }
                None => {
                    reward.push(family.base().to_vec());
                    pinned_reward.push(false);
                }
            }
        }
        if transition.iter().chain(&reward).any(Vec::is_empty) {
            return Err(FmdpError::Contract(
                "unpinned factors need a family with size-m candidates".into(),
            ));
        }
        Ok(Self {
            transition,
            reward,
            pinned_transition,
            pinned_reward,
        })
    }

    pub fn is_pinned_transition(&self, i: usize) -> bool {
        self.pinned_transition[i]
    }

    pub fn is_pinned_reward(&self, j: usize) -> bool {
        self.pinned_reward[j]
    }

    pub fn transition_sizes(&self) -> Vec<usize> {
        self.transition.iter().map(Vec::len).collect()
    }

    pub fn reward_sizes(&self) -> Vec<usize> {
        self.reward.iter().map(Vec::len).collect()
    }

    /// `other ⊆ self` factor by factor.
    pub fn contains_all(&self, other: &ConsistentScopeSets) -> bool {
        let sub = |a: &[Vec<usize>], b: &[Vec<usize>]| {
            a.len() == b.len() && a.iter().zip(b).all(|(big, small)| small.iter().all(|z| big.contains(z)))
        };
        sub(&self.transition, &other.transition) && sub(&self.reward, &other.reward)
    }

    /// Surviving scopes that do not contain the given true scopes.
    pub fn wrong_transition_counts(&self, family: &ScopeFamily, truth: &[Scope]) -> Vec<usize> {
        wrong_counts(&self.transition, family, truth)
    }

    pub fn wrong_reward_counts(&self, family: &ScopeFamily, truth: &[Scope]) -> Vec<usize> {
        wrong_counts(&self.reward, family, truth)
    }

    /// Whether some surviving scope contains each true scope.
    pub fn truth_alive(&self, family: &ScopeFamily, trans: &[Scope], reward: &[Scope]) -> bool {
        let alive = |sets: &[Vec<usize>], truth: &[Scope]| {
            sets.iter()
                .zip(truth)
                .all(|(set, t)| set.iter().any(|&z| t.is_subset(family.scope(z))))
        };
        alive(&self.transition, trans) && alive(&self.reward, reward)
    }
}

fn wrong_counts(sets: &[Vec<usize>], family: &ScopeFamily, truth: &[Scope]) -> Vec<usize> {
    sets.iter()
        .zip(truth)
        .map(|(set, t)| set.iter().filter(|&&z| !t.is_subset(family.scope(z))).count())
        .collect()
}

/// Consistency test for transition factor `i` and candidate `z` (a family id).
pub fn transition_consistent(snap: &EmpiricalSnapshot, i: usize, z: usize, threshold_scale: f64) -> bool {
    let family = snap.family();
    let w_i = snap.state_sizes()[i];
    for &z2 in family.base() {
        let Some(pair) = family.pair(z, z2) else {
            return true;
        };
        let u = pair.union;
        for (v, &vz) in pair.to_first.iter().enumerate() {
            for w in 0..w_i {
                let gap = (snap.p_bar(u, i, v, w) - snap.p_bar(z, i, vz, w)).abs();
                if gap > 2.0 * threshold_scale * snap.eps_trans(u, i, v, w) {
                    return false;
                }
            }
        }
    }
    true
}

/// Consistency test for reward factor `j` and candidate `z`.
pub fn reward_consistent(snap: &EmpiricalSnapshot, j: usize, z: usize, threshold_scale: f64) -> bool {
    let family = snap.family();
    for &z2 in family.base() {
        let Some(pair) = family.pair(z, z2) else {
            return true;
        };
        let u = pair.union;
        for (v, &vz) in pair.to_first.iter().enumerate() {
            let gap = (snap.r_bar(u, j, v) - snap.r_bar(z, j, vz)).abs();
            if gap > 2.0 * threshold_scale * snap.eps_reward(u, v) {
                return false;
            }
        }
    }
    true
}

/// Remove every inconsistent scope from the unpinned sets, in lexicographic
/// order over (factor, scope). An emptied set is a structural fault.
pub fn eliminate(
    sets: &mut ConsistentScopeSets,
    snap: &EmpiricalSnapshot,
    threshold_scale: f64,
    episode: usize,
) -> Result<EliminationReport> {
    let mut report = EliminationReport {
        transition: vec![Vec::new(); sets.transition.len()],
        reward: vec![Vec::new(); sets.reward.len()],
    };
    for i in 0..sets.transition.len() {
        if sets.pinned_transition[i] {
            continue;
        }
        let (keep, drop): (Vec<usize>, Vec<usize>) = sets.transition[i]
            .iter()
            .partition(|&&z| transition_consistent(snap, i, z, threshold_scale));
        if keep.is_empty() {
            return Err(FmdpError::StructuralFault {
                kind: "transition",
                factor: i,
                episode,
            });
        }
        sets.transition[i] = keep;
        report.transition[i] = drop;
    }
    for j in 0..sets.reward.len() {
        if sets.pinned_reward[j] {
            continue;
        }
        let (keep, drop): (Vec<usize>, Vec<usize>) = sets.reward[j]
            .iter()
            .partition(|&&z| reward_consistent(snap, j, z, threshold_scale));
        if keep.is_empty() {
            return Err(FmdpError::StructuralFault {
                kind: "reward",
                factor: j,
                episode,
            });
        }
        sets.reward[j] = keep;
        report.reward[j] = drop;
    }
    Ok(report)
}

/// Largest `|P̄_{i,Z} − P̄_{i,Z'}| − 4 ε_{i,Z∪Z'}` over surviving pairs; non-positive when
/// the triangle bound holds.
pub fn max_pairwise_excess(sets: &ConsistentScopeSets, snap: &EmpiricalSnapshot) -> f64 {
    let family: &Arc<ScopeFamily> = snap.family();
    let mut worst = f64::NEG_INFINITY;
    for (i, set) in sets.transition.iter().enumerate() {
        for &a in set {
            for &b in set {
                let (Some(pa), Some(pb)) = (family.pair(a, b), family.pair(b, a)) else {
                    continue;
                };
                let u = pa.union;
                for v in 0..family.cells(u) {
                    for w in 0..snap.state_sizes()[i] {
                        let gap = (snap.p_bar(a, i, pa.to_first[v], w) - snap.p_bar(b, i, pb.to_first[v], w)).abs();
                        worst = worst.max(gap - 4.0 * snap.eps_trans(u, i, v, w));
                    }
                }
            }
        }
    }
    worst
}
