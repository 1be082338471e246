//! Average-reward planning: extended value iteration over any
//! [`PlanningModel`], plus exhaustive policy evaluation used as an oracle.

use crate::error::{FmdpError, Result};
use crate::tabular::{SparseMdp, TabularMdp};

/// Default span tolerance of [`evi_solve`].
pub const DEFAULT_EVI_TOL: f64 = 1e-4;
/// Default iteration cap of [`evi_solve`].
pub const DEFAULT_EVI_MAX_ITER: usize = 100_000;
/// Default weight of the Bellman update in the damped iteration.
pub const DEFAULT_DAMPING: f64 = 0.9;
/// Largest policy count enumerated by [`exact_gain_brute_force`].
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

/// An MDP with per-state action lists, as seen by the planner.
///
/// Actions of a state are `0..num_actions(s)`. Views whose action sets are
/// products of independent choices override [`PlanningModel::backup`] with a
/// structured maximization.
pub trait PlanningModel: Sync {
    fn num_states(&self) -> usize;

    fn num_actions(&self, s: usize) -> usize;

    fn reward(&self, s: usize, a: usize) -> f64;

    /// Next-state distribution as `(state, prob)` pairs, appended to `out` after clearing it.
    fn transitions(&self, s: usize, a: usize, out: &mut Vec<(usize, f64)>);

    /// `max_a [r(s,a) + Σ p(s'|s,a) h(s')]` and the first maximizing action.
    fn backup(&self, s: usize, h: &[f64]) -> (f64, usize) {
        let mut buf = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..self.num_actions(s) {
            self.transitions(s, a, &mut buf);
            let q = self.reward(s, a) + buf.iter().map(|&(s2, p)| p * h[s2]).sum::<f64>();
            if q > best {
                best = q;
                arg = a;
            }
        }
        (best, arg)
    }
}

impl PlanningModel for TabularMdp {
    fn num_states(&self) -> usize {
        TabularMdp::num_states(self)
    }

    fn num_actions(&self, _s: usize) -> usize {
        TabularMdp::num_actions(self)
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        TabularMdp::reward(self, s, a)
    }

    fn transitions(&self, s: usize, a: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend(self.row(s, a).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(k, &p)| (k, p)));
    }

    fn backup(&self, s: usize, h: &[f64]) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..TabularMdp::num_actions(self) {
            let q = TabularMdp::reward(self, s, a) + self.row(s, a).iter().zip(h).map(|(p, v)| p * v).sum::<f64>();
            if q > best {
                best = q;
                arg = a;
            }
        }
        (best, arg)
    }
}

impl PlanningModel for SparseMdp {
    fn num_states(&self) -> usize {
        self.states.len()
    }

    fn num_actions(&self, s: usize) -> usize {
        self.states[s].len()
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.states[s][a].reward
    }

    fn transitions(&self, s: usize, a: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend_from_slice(&self.states[s][a].next);
    }

    fn backup(&self, s: usize, h: &[f64]) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (a, act) in self.states[s].iter().enumerate() {
            let q = act.reward + act.next.iter().map(|&(s2, p)| p * h[s2]).sum::<f64>();
            if q > best {
                best = q;
                arg = a;
            }
        }
        (best, arg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight `α` of `h ← (1−α) h + α T h`; 1.0 gives plain value iteration.
    pub damping: f64,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for EviOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_EVI_TOL,
            max_iter: DEFAULT_EVI_MAX_ITER,
            damping: DEFAULT_DAMPING,
            warm_start: None,
        }
    }
}

impl EviOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EviResult {
    pub gain: f64,
    /// Bias with `min h = 0`.
    pub bias: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// `max h − min h`.
    pub span: f64,
}

/// Relative value iteration with span stopping.
///
/// Stops when `sp(T h − h) ≤ tol`; the gain is the midpoint of `T h − h`.
pub fn evi_solve<M: PlanningModel + ?Sized>(model: &M, opts: &EviOptions) -> Result<EviResult> {
    let n = model.num_states();
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(FmdpError::Domain("tol must be positive and damping in (0,1]".into()));
    }
    if n == 0 {
        return Err(FmdpError::InvalidModel("no states".into()));
    }
    let mut h = match &opts.warm_start {
        Some(w) if w.len() == n && w.iter().all(|x| x.is_finite()) => w.clone(),
        _ => vec![0.0; n],
    };
    let mut th = vec![0.0; n];
    let mut policy = vec![0; n];
    let mut span = f64::INFINITY;
    for it in 1..=opts.max_iter {
        for s in 0..n {
            let (v, a) = model.backup(s, &h);
            th[s] = v;
            policy[s] = a;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..n {
            let diff = th[s] - h[s];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        span = hi - lo;
        if span <= opts.tol {
            let min = th.iter().copied().fold(f64::INFINITY, f64::min);
            let bias: Vec<f64> = th.iter().map(|v| v - min).collect();
            let bias_span = bias.iter().copied().fold(0.0, f64::max);
            return Ok(EviResult {
                gain: 0.5 * (hi + lo),
                bias,
                policy,
                iterations: it,
                span: bias_span,
            });
        }
        if !span.is_finite() {
            break;
        }
        let a = opts.damping;
        let mut min = f64::INFINITY;
        for s in 0..n {
            h[s] = (1.0 - a) * h[s] + a * th[s];
            min = min.min(h[s]);
        }
        for v in &mut h {
            *v -= min;
        }
    }
    Err(FmdpError::NonConvergence {
        iterations: opts.max_iter,
        span,
    })
}

/// Per-state gain of a stationary deterministic policy, by power iteration
/// on the lazy chain `0.5 I + 0.5 P_π` started from the reward vector.
pub fn policy_gain_vector(model: &TabularMdp, policy: &[usize]) -> Vec<f64> {
    let n = model.num_states();
    let r: Vec<f64> = (0..n).map(|s| model.reward(s, policy[s])).collect();
    let rows: Vec<&[f64]> = (0..n).map(|s| model.row(s, policy[s])).collect();
    let mut v = r.clone();
    let mut next = vec![0.0; n];
    for _ in 0..1_000_000 {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let pv: f64 = rows[s].iter().zip(&v).map(|(p, x)| p * x).sum();
            next[s] = 0.5 * v[s] + 0.5 * pv;
            delta = delta.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if delta < 1e-13 {
            break;
        }
    }
    v
}

/// Average over states of [`policy_gain_vector`]; equals the gain for unichain policies.
pub fn policy_gain(model: &TabularMdp, policy: &[usize]) -> f64 {
    let g = policy_gain_vector(model, policy);
    g.iter().sum::<f64>() / g.len() as f64
}

/// Enumerate every deterministic stationary policy; return the best
/// worst-state gain and a policy achieving it (first in enumeration order).
pub fn exact_gain_brute_force(model: &TabularMdp) -> Result<(f64, Vec<usize>)> {
    let n = model.num_states();
    let a = model.num_actions();
    let count = (a as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_CAP {
        return Err(FmdpError::Size {
            what: "deterministic policies".into(),
            needed: count,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut policy = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    let mut best_policy = policy.clone();
    loop {
        let g = policy_gain_vector(model, &policy);
        let worst = g.iter().copied().fold(f64::INFINITY, f64::min);
        if worst > best + 1e-12 {
            best = worst;
            best_policy.clone_from(&policy);
        }
        // odometer increment, state 0 fastest
        let mut k = 0;
        loop {
            if k == n {
                return Ok((best, best_policy));
            }
            policy[k] += 1;
            if policy[k] < a {
                break;
            }
            policy[k] = 0;
            k += 1;
        }
    }
}

/// Greedy one-step policy of a bias vector over a tabular model.
pub fn greedy_policy<M: PlanningModel + ?Sized>(model: &M, h: &[f64]) -> Vec<usize> {
    (0..model.num_states()).map(|s| model.backup(s, h).1).collect()
}
