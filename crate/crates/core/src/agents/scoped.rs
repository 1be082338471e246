//! Learners built on scope counters: structure learning, known structure,
//! and the non-factored-action variant.

use std::sync::Arc;

use crate::error::{FmdpError, Result};
use crate::estimator::{ConfidenceParams, ScopeCounters, ScopeFamily};
use crate::model::StepRecord;
use crate::optimistic::{build_nfa_optimistic, TildeOptions, TildeView};
use crate::planner::{evi_solve, EviOptions};
use crate::space::FactorSpace;
use crate::structure::{eliminate, ConsistentScopeSets};

use super::audit::concentration_holds;
use super::{Algorithm, AgentConfig, EpisodeAudit, EpisodePlan, Learner, ProblemShape, Truth};

#[derive(Debug, Clone)]
enum Planner {
    Tilde {
        sets: ConsistentScopeSets,
        opts: TildeOptions,
        threshold_scale: f64,
    },
    Nfa {
        trans_ids: Vec<usize>,
        reward_ids: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct ScopedLearner {
    state_space: FactorSpace,
    action_space: FactorSpace,
    counters: ScopeCounters,
    params: ConfidenceParams,
    planner: Planner,
    evi: EviOptions,
    flatten_cap: usize,
    truth: Option<Truth>,
    warm: Option<Vec<f64>>,
    x: Vec<usize>,
    next: Vec<usize>,
    consistent: bool,
    monotone: bool,
}

impl ScopedLearner {
    pub fn new(shape: &ProblemShape, config: &AgentConfig, truth: Option<Truth>) -> Result<Self> {
        let d = shape.state_space.num_factors();
        if config.pins.transition.len() != d || config.pins.reward.len() != shape.num_rewards {
            return Err(FmdpError::Contract("pins do not match the factor counts".into()));
        }
        let joint = shape.state_space.product(&shape.action_space)?;
        let (family, planner) = match config.algorithm {
            Algorithm::NfaDorl => {
                if shape.action_space.num_factors() != 1 {
                    return Err(FmdpError::Contract("non-factored actions need a single action factor".into()));
                }
                let family = ScopeFamily::explicit(&joint, config.pins.scopes())?;
                let lookup = |z: &Option<crate::space::Scope>| family.id(z.as_ref().expect("validated")).expect("tracked");
                let trans_ids = config.pins.transition.iter().map(lookup).collect();
                let reward_ids = config.pins.reward.iter().map(lookup).collect();
                (family, Planner::Nfa { trans_ids, reward_ids })
            }
            _ => {
                let family = ScopeFamily::structure_learning(&joint, config.m, &config.pins.scopes())?;
                let sets = ConsistentScopeSets::initial(&family, &config.pins)?;
                let opts = TildeOptions {
                    cap: config.tilde_cap,
                    greedy_direction: config.greedy_direction,
                };
                (
                    family,
                    Planner::Tilde {
                        sets,
                        opts,
                        threshold_scale: config.threshold_scale,
                    },
                )
            }
        };
        let params = ConfidenceParams::for_family(config.delta, &shape.state_space, &family)?
            .with_radius_scale(config.radius_scale);
        let counters = ScopeCounters::new(Arc::new(family), shape.state_space.sizes().to_vec(), shape.num_rewards);
        Ok(Self {
            state_space: shape.state_space.clone(),
            action_space: shape.action_space.clone(),
            counters,
            params,
            planner,
            evi: config.evi(),
            flatten_cap: config.flatten_cap,
            truth,
            warm: None,
            x: vec![0; joint.num_factors()],
            next: vec![0; d],
            consistent: true,
            monotone: true,
        })
    }

    pub fn counters(&self) -> &ScopeCounters {
        &self.counters
    }

    /// Current consistent sets, for the structure-learning planners.
    pub fn sets(&self) -> Option<&ConsistentScopeSets> {
        match &self.planner {
            Planner::Tilde { sets, .. } => Some(sets),
            Planner::Nfa { .. } => None,
        }
    }

    fn fill(&self, state: usize, action: usize, x: &mut [usize]) {
        let d = self.state_space.num_factors();
        self.state_space.decode_into(state, &mut x[..d]);
        self.action_space.decode_into(action, &mut x[d..]);
    }
}

impl Learner for ScopedLearner {
    fn start_episode(&mut self, k: usize) -> Result<EpisodePlan> {
        self.counters.roll_episode();
        self.consistent &= self.counters.check_invariants();
        let snap = Arc::new(self.counters.snapshot(&self.params));
        let concentration = self.truth.as_ref().map(|t| concentration_holds(&snap, &t.model));
        let family = snap.family().clone();
        match &mut self.planner {
            Planner::Tilde {
                sets,
                opts,
                threshold_scale,
            } => {
                let before = sets.clone();
                let report = eliminate(sets, &snap, *threshold_scale, k)?;
                self.monotone &= before.contains_all(sets);
                let view = TildeView::build(snap, sets.clone(), &self.state_space, &self.action_space, opts.clone())?;
                let mut evi = self.evi.clone();
                evi.warm_start = self.warm.take();
                let res = evi_solve(&view, &evi)?;
                let policy = view.policy_from(&res);
                let audit = self.truth.as_ref().map(|t| {
                    let ts = t.model.transition_scopes();
                    let rs = t.model.reward_scopes();
                    EpisodeAudit {
                        concentration: concentration.unwrap_or(false),
                        optimism_margin: res.gain - t.lambda_star,
                        truth_alive: sets.truth_alive(&family, &ts, &rs),
                        wrong_transition: sets.wrong_transition_counts(&family, &ts),
                        wrong_reward: sets.wrong_reward_counts(&family, &rs),
                    }
                });
                let plan = EpisodePlan {
                    gain: res.gain,
                    policy,
                    transition_set_sizes: sets.transition_sizes(),
                    reward_set_sizes: sets.reward_sizes(),
                    eliminated: report.removed(),
                    audit,
                };
                self.warm = Some(res.bias);
                Ok(plan)
            }
            Planner::Nfa { trans_ids, reward_ids } => {
                let nfa = build_nfa_optimistic(
                    snap,
                    &self.state_space,
                    self.action_space.cardinality(),
                    trans_ids,
                    reward_ids,
                )?;
                let sol = nfa.solve(&self.evi, self.flatten_cap)?;
                let gain = sol.gain * nfa.stretch_length() as f64;
                let audit = self.truth.as_ref().map(|t| EpisodeAudit {
                    concentration: concentration.unwrap_or(false),
                    optimism_margin: gain - t.lambda_star,
                    truth_alive: true,
                    wrong_transition: vec![0; trans_ids.len()],
                    wrong_reward: vec![0; reward_ids.len()],
                });
                Ok(EpisodePlan {
                    gain,
                    policy: sol.policy,
                    transition_set_sizes: vec![1; trans_ids.len()],
                    reward_set_sizes: vec![1; reward_ids.len()],
                    eliminated: 0,
                    audit,
                })
            }
        }
    }

    fn triggered(&self, state: usize, action: usize) -> bool {
        let mut x = vec![0; self.x.len()];
        self.fill(state, action, &mut x);
        self.counters.doubling_triggered(&x)
    }

    fn observe(&mut self, step: &StepRecord) {
        let mut x = std::mem::take(&mut self.x);
        self.fill(step.state, step.action, &mut x);
        self.state_space.decode_into(step.next_state, &mut self.next);
        self.counters.record(&x, &self.next, &step.reward_factors);
        self.x = x;
    }

    fn tracked_cells(&self) -> u128 {
        self.counters.family().total_cells()
    }

    fn counters_consistent(&self) -> bool {
        self.consistent
    }

    fn sets_monotone(&self) -> bool {
        self.monotone
    }
}
