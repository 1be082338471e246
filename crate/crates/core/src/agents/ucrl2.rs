//! Flat UCRL2 over the enumerated state and action sets.

use crate::error::{FmdpError, Result};
use crate::model::StepRecord;
use crate::planner::{evi_solve, EviOptions, PlanningModel};
use crate::tabular::TabularMdp;

use super::audit::flat_concentration_holds;
use super::{AgentConfig, EpisodeAudit, EpisodePlan, Learner, ProblemShape, Truth};

/// Optimistic view: every pair may move up to half its L1 radius onto the
/// best state, taken from the worst states of its empirical support.
#[derive(Debug, Clone)]
pub struct Ucrl2View {
    num_states: usize,
    num_actions: usize,
    /// Empirical rows as `(state, prob)`; empty for unvisited pairs.
    rows: Vec<Vec<(usize, f64)>>,
    radius: Vec<f64>,
    reward: Vec<f64>,
}

impl Ucrl2View {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        radius: Vec<f64>,
        reward: Vec<f64>,
    ) -> Result<Self> {
        let n = num_states * num_actions;
        if rows.len() != n || radius.len() != n || reward.len() != n {
            return Err(FmdpError::Contract("table sizes differ from |S||A|".into()));
        }
        Ok(Self {
            num_states,
            num_actions,
            rows,
            radius,
            reward,
        })
    }

    fn value(&self, pair: usize, h: &[f64], best: usize, buf: &mut Vec<(usize, f64)>) -> f64 {
        let row = &self.rows[pair];
        if row.is_empty() {
            return h[best];
        }
        buf.clear();
        buf.extend(row.iter().copied());
        buf.sort_by(|a, b| h[a.0].total_cmp(&h[b.0]).then(a.0.cmp(&b.0)));
        let p_best = row.iter().find(|e| e.0 == best).map_or(0.0, |e| e.1);
        let raised = (p_best + 0.5 * self.radius[pair]).min(1.0);
        let mut excess = raised - p_best;
        let mut v = raised * h[best];
        for &(s2, p) in buf.iter() {
            if s2 == best {
                continue;
            }
            let cut = p.min(excess);
            excess -= cut;
            v += (p - cut) * h[s2];
        }
        v
    }
}

impl PlanningModel for Ucrl2View {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self, _s: usize) -> usize {
        self.num_actions
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    fn transitions(&self, s: usize, a: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let row = &self.rows[s * self.num_actions + a];
        if row.is_empty() {
            out.push((s, 1.0));
        } else {
            out.extend_from_slice(row);
        }
    }

    fn backup(&self, s: usize, h: &[f64]) -> (f64, usize) {
        let mut best = 0;
        for (k, &v) in h.iter().enumerate() {
            if v > h[best] {
                best = k;
            }
        }
        let mut buf = Vec::new();
        let mut top = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..self.num_actions {
            let pair = s * self.num_actions + a;
            let q = self.reward[pair] + self.value(pair, h, best, &mut buf);
            if q > top {
                top = q;
                arg = a;
            }
        }
        (top, arg)
    }
}

/// Largest `|S|² |A|` handled with dense transition counts.
pub const UCRL2_DENSE_CAP: usize = 1 << 26;

#[derive(Debug, Clone)]
pub struct Ucrl2Learner {
    ns: usize,
    na: usize,
    delta: f64,
    radius_scale: f64,
    evi: EviOptions,
    n: Vec<u64>,
    nu: Vec<u64>,
    trans: Vec<u32>,
    nu_trans: Vec<u32>,
    reward_sum: Vec<f64>,
    nu_reward: Vec<f64>,
    t: u64,
    truth: Option<(Truth, TabularMdp)>,
    warm: Option<Vec<f64>>,
}

impl Ucrl2Learner {
    pub fn new(shape: &ProblemShape, config: &AgentConfig, truth: Option<Truth>) -> Result<Self> {
        let ns = shape.state_space.cardinality();
        let na = shape.action_space.cardinality();
        let needed = ns as u128 * ns as u128 * na as u128;
        if ns > config.flatten_cap || needed > UCRL2_DENSE_CAP as u128 {
            return Err(FmdpError::Size {
                what: "flat transition counts".into(),
                needed,
                cap: UCRL2_DENSE_CAP as u128,
            });
        }
        let truth = match truth {
            Some(t) => {
                let flat = t.model.flatten_with_cap(config.flatten_cap)?;
                Some((t, flat))
            }
            None => None,
        };
        Ok(Self {
            ns,
            na,
            delta: config.delta,
            radius_scale: config.radius_scale,
            evi: config.evi(),
            n: vec![0; ns * na],
            nu: vec![0; ns * na],
            trans: vec![0; ns * ns * na],
            nu_trans: vec![0; ns * ns * na],
            reward_sum: vec![0.0; ns * na],
            nu_reward: vec![0.0; ns * na],
            t: 1,
            truth,
            warm: None,
        })
    }

    /// `(sqrt(14 |S| ln(2|A| t_k/δ) / N⁺), sqrt(3.5 ln(2|S||A| t_k/δ) / N⁺))`.
    pub fn radii(&self, pair: usize) -> (f64, f64) {
        let n = self.n[pair].max(1) as f64;
        let t = self.t as f64;
        let (s, a) = (self.ns as f64, self.na as f64);
        let rp = (14.0 * s * (2.0 * a * t / self.delta).ln() / n).sqrt();
        let rr = (3.5 * (2.0 * s * a * t / self.delta).ln() / n).sqrt();
        (self.radius_scale * rp, self.radius_scale * rr)
    }

    fn p_hat(&self, pair: usize, s2: usize) -> f64 {
        self.trans[pair * self.ns + s2] as f64 / self.n[pair].max(1) as f64
    }

    fn r_hat(&self, pair: usize) -> f64 {
        self.reward_sum[pair] / self.n[pair].max(1) as f64
    }

    pub fn view(&self) -> Result<Ucrl2View> {
        let pairs = self.ns * self.na;
        let mut rows = Vec::with_capacity(pairs);
        let mut radius = Vec::with_capacity(pairs);
        let mut reward = Vec::with_capacity(pairs);
        for pair in 0..pairs {
            let row: Vec<(usize, f64)> = if self.n[pair] == 0 {
                Vec::new()
            } else {
                (0..self.ns)
                    .filter(|&s2| self.trans[pair * self.ns + s2] > 0)
                    .map(|s2| (s2, self.p_hat(pair, s2)))
                    .collect()
            };
            let (rp, rr) = self.radii(pair);
            rows.push(row);
            radius.push(rp);
            reward.push((self.r_hat(pair) + rr).min(1.0));
        }
        Ucrl2View::new(self.ns, self.na, rows, radius, reward)
    }
}

impl Learner for Ucrl2Learner {
    fn start_episode(&mut self, _k: usize) -> Result<EpisodePlan> {
        for pair in 0..self.ns * self.na {
            self.n[pair] += self.nu[pair];
            self.nu[pair] = 0;
            self.reward_sum[pair] += self.nu_reward[pair];
            self.nu_reward[pair] = 0.0;
        }
        for (tot, cur) in self.trans.iter_mut().zip(self.nu_trans.iter_mut()) {
            *tot += *cur;
            *cur = 0;
        }
        let view = self.view()?;
        let mut evi = self.evi.clone();
        evi.warm_start = self.warm.take();
        let res = evi_solve(&view, &evi)?;
        let audit = self.truth.as_ref().map(|(t, flat)| {
            let na = self.na;
            let concentration = flat_concentration_holds(
                flat,
                &self.n,
                |s, a, s2| self.p_hat(s * na + a, s2),
                |s, a| self.r_hat(s * na + a),
                |s, a| self.radii(s * na + a),
            );
            EpisodeAudit {
                concentration,
                optimism_margin: res.gain - t.lambda_star,
                truth_alive: true,
                wrong_transition: Vec::new(),
                wrong_reward: Vec::new(),
            }
        });
        let plan = EpisodePlan {
            gain: res.gain,
            policy: res.policy.clone(),
            transition_set_sizes: Vec::new(),
            reward_set_sizes: Vec::new(),
            eliminated: 0,
            audit,
        };
        self.warm = Some(res.bias);
        Ok(plan)
    }

    fn triggered(&self, state: usize, action: usize) -> bool {
        let pair = state * self.na + action;
        self.nu[pair] >= self.n[pair].max(1)
    }

    fn observe(&mut self, step: &StepRecord) {
        let pair = step.state * self.na + step.action;
        self.nu[pair] += 1;
        self.nu_trans[pair * self.ns + step.next_state] += 1;
        self.nu_reward[pair] += step.reward();
        self.t += 1;
    }

    fn tracked_cells(&self) -> u128 {
        (self.ns * self.na) as u128
    }

    fn counters_consistent(&self) -> bool {
        (0..self.ns * self.na).all(|pair| {
            self.trans[pair * self.ns..(pair + 1) * self.ns].iter().map(|&c| c as u64).sum::<u64>() == self.n[pair]
        })
    }

    fn sets_monotone(&self) -> bool {
        true
    }
}
