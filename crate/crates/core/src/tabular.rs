//! Flat MDP representations: dense tables for small models, sparse
//! reachable-state expansions for the stretched planning models.

use std::collections::{HashMap, VecDeque};

use crate::error::{FmdpError, Result};
use crate::model::Fmdp;

/// Dense tabular MDP: `p[(s * A + a) * S + s']`, `r[s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    p: Vec<f64>,
    r: Vec<f64>,
}

/// Largest state count accepted by [`TabularMdp::diameter`].
pub const DIAMETER_MAX_STATES: usize = 64;
/// Hitting times above this bound are treated as divergence.
pub const DIAMETER_BOUND: f64 = 1e6;

impl TabularMdp {
    pub fn new(num_states: usize, num_actions: usize, p: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if p.len() != num_states * num_actions * num_states || r.len() != num_states * num_actions
        {
            return Err(FmdpError::InvalidModel(format!(
                "tabular tables have wrong length for |S|={num_states}, |A|={num_actions}"
            )));
        }
        for (k, row) in p.chunks(num_states.max(1)).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(FmdpError::InvalidModel(format!(
                    "row (s={}, a={}) sums to {sum}",
                    k / num_actions,
                    k % num_actions
                )));
            }
        }
        if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(FmdpError::InvalidModel("reward outside [0,1]".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            p,
            r,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prob(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.p[(s * self.num_actions + a) * self.num_states + s2]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.num_actions + a) * self.num_states;
        &self.p[base..base + self.num_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[s * self.num_actions + a]
    }

    /// `max_{s != s'} min_π E[T(s' | π, s)]`, by one stochastic-shortest-path
    /// value iteration per target state.
    pub fn diameter(&self) -> Result<f64> {
        let n = self.num_states;
        if n > DIAMETER_MAX_STATES {
            return Err(FmdpError::Size {
                what: "states for diameter".into(),
                needed: n as u128,
                cap: DIAMETER_MAX_STATES as u128,
            });
        }
        let mut diameter: f64 = 0.0;
        for target in 0..n {
            // states that cannot reach the target under any policy
            let reach = self.can_reach(target);
            if let Some(from) = reach.iter().position(|r| !r) {
                return Err(FmdpError::DiameterInfinite { from, target });
            }
            let mut t = vec![0.0; n];
            loop {
                let mut delta: f64 = 0.0;
                let mut next = vec![0.0; n];
                for s in 0..n {
                    if s == target {
                        continue;
                    }
                    let best = (0..self.num_actions)
                        .map(|a| {
                            1.0 + self
                                .row(s, a)
                                .iter()
                                .zip(&t)
                                .map(|(p, v)| p * v)
                                .sum::<f64>()
                        })
                        .fold(f64::INFINITY, f64::min);
                    delta = delta.max((best - t[s]).abs());
                    next[s] = best;
                }
                t = next;
                if t.iter().any(|&v| v > DIAMETER_BOUND) {
                    return Err(FmdpError::DiameterInfinite {
                        from: t.iter().position(|&v| v > DIAMETER_BOUND).unwrap_or(0),
                        target,
                    });
                }
                if delta <= 1e-6 {
                    break;
                }
            }
            diameter = diameter.max(t.iter().copied().fold(0.0, f64::max));
        }
        Ok(diameter)
    }

    /// Every state reaches every other under some policy, i.e. the support
    /// graph over all actions is strongly connected.
    pub fn is_communicating(&self) -> bool {
        let n = self.num_states;
        if n == 0 {
            return false;
        }
        let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            for a in 0..self.num_actions {
                for (s2, &p) in self.row(s, a).iter().enumerate() {
                    if p > 0.0 {
                        fwd[s].push(s2);
                        bwd[s2].push(s);
                    }
                }
            }
        }
        let covers = |adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(s) = stack.pop() {
                for &t in &adj[s] {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen.iter().all(|&b| b)
        };
        covers(&fwd) && covers(&bwd)
    }

    fn can_reach(&self, target: usize) -> Vec<bool> {
        let n = self.num_states;
        let mut ok = vec![false; n];
        ok[target] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if ok[s] {
                    continue;
                }
                let reaches = (0..self.num_actions)
                    .any(|a| self.row(s, a).iter().enumerate().any(|(s2, &p)| p > 0.0 && ok[s2]));
                if reaches {
                    ok[s] = true;
                    changed = true;
                }
            }
        }
        ok
    }
}

/// One action of a [`SparseMdp`] state.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAction {
    /// Index of the action in the originating model.
    pub label: usize,
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

/// Sparse MDP with per-state action lists; actions with identical effects
/// may be merged, keeping the smallest label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMdp {
    pub states: Vec<Vec<SparseAction>>,
}

impl SparseMdp {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }
}

/// Reachable part of an FMDP, with state indices mapped to dense ids.
#[derive(Debug, Clone)]
pub struct ReachableModel {
    pub mdp: SparseMdp,
    /// Original state index of every dense id.
    pub states: Vec<usize>,
    pub index: HashMap<usize, usize>,
}

/// Breadth-first expansion of `model` from `starts`. Actions whose per-factor
/// scope cells coincide at a state are merged; this is exact because every
/// transition and reward factor then sees identical inputs.
pub fn reachable_flatten(model: &Fmdp, starts: &[usize], cap: usize) -> Result<ReachableModel> {
    let joint = model.joint_space();
    let d = model.num_state_factors();
    let na = model.num_actions();
    let scopes: Vec<_> = model
        .transitions()
        .iter()
        .map(|t| t.scope.clone())
        .chain(model.rewards().iter().map(|r| r.scope.clone()))
        .collect();
    let indexers: Vec<_> = scopes
        .iter()
        .map(|z| crate::space::ScopeIndexer::new(joint, z))
        .collect::<Result<_>>()?;

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut states: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for &s in starts {
        if !index.contains_key(&s) {
            index.insert(s, states.len());
            states.push(s);
            queue.push_back(s);
        }
    }
    let mut per_state: Vec<Vec<SparseAction>> = Vec::new();
    let mut x = vec![0; joint.num_factors()];
    while let Some(s) = queue.pop_front() {
        let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
        let mut actions = Vec::new();
        model.state_space().decode_into(s, &mut x[..d]);
        for a in 0..na {
            model.action_space().decode_into(a, &mut x[d..]);
            let sig: Vec<usize> = indexers.iter().map(|ix| ix.cell(&x)).collect();
            if seen.insert(sig, ()).is_some() {
                continue;
            }
            let next = model.next_state_support(&x);
            for &(s2, _) in &next {
                if !index.contains_key(&s2) {
                    if states.len() >= cap {
                        return Err(FmdpError::Size {
                            what: "reachable states".into(),
                            needed: states.len() as u128 + 1,
                            cap: cap as u128,
                        });
                    }
                    index.insert(s2, states.len());
                    states.push(s2);
                    queue.push_back(s2);
                }
            }
            actions.push(SparseAction {
                label: a,
                reward: model.reward_mean(&x),
                next: next.into_iter().map(|(s2, p)| (index[&s2], p)).collect(),
            });
        }
        per_state.push(actions);
    }
    // states were appended in BFS order, which matches per_state order
    Ok(ReachableModel {
        mdp: SparseMdp { states: per_state },
        states,
        index,
    })
}
