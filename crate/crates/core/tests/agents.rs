mod common;

use std::sync::Arc;

use fmdp_core::agents::{graded_pins, run, AgentConfig, Algorithm, ProblemShape, RunOutput, Truth};
use fmdp_core::environments::{EnvSpec, FmdpEnv};
use fmdp_core::model::{Fmdp, RewardFactor, TransitionFactor};
use fmdp_core::planner::{evi_solve, EviOptions};
use fmdp_core::space::{FactorSpace, Scope};
use fmdp_core::structure::ScopePins;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn optimum(model: &Fmdp) -> (f64, Vec<usize>) {
    let res = evi_solve(&model.flatten().unwrap(), &EviOptions::with_tol(1e-10)).unwrap();
    (res.gain, res.policy)
}

fn run_on(model: &Arc<Fmdp>, cfg: &AgentConfig, horizon: u64, seed: u64, audit: bool) -> RunOutput {
    let mut env = FmdpEnv::new(Arc::clone(model), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = audit.then(|| Truth {
        model: Arc::clone(model),
        lambda_star: optimum(model).0,
    });
    run(&mut env, &ProblemShape::of(model), cfg, horizon, &mut rng, truth).unwrap()
}

fn config(model: &Fmdp, alg: Algorithm, learned: usize) -> AgentConfig {
    let pins = graded_pins(learned, &model.transition_scopes(), &model.reward_scopes(), true);
    AgentConfig::new(alg, model.max_scope_size(), pins)
}

fn sysadmin() -> Arc<Fmdp> {
    "sysadmin:circular:n=3".parse::<EnvSpec>().unwrap().build().unwrap().model
}

#[test]
fn single_step_run() {
    let model = sysadmin();
    for alg in Algorithm::ALL {
        let out = run_on(&model, &config(&model, alg, 0), 1, 0, false);
        assert_eq!(out.steps.len(), 1, "{alg}");
        assert_eq!(out.episodes.len(), 1);
        assert_eq!(out.episodes[0].gain, 1.0);
        assert_eq!(out.episodes[0].t_k, 1);
    }
}

#[test]
fn zero_horizon_and_bad_configs_are_rejected() {
    let model = sysadmin();
    let mut env = FmdpEnv::new(Arc::clone(&model), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let shape = ProblemShape::of(&model);
    assert!(run(&mut env, &shape, &config(&model, Algorithm::SlfUcrl, 3), 0, &mut rng, None).is_err());
    for alg in [Algorithm::FactoredUcrl, Algorithm::NfaDorl] {
        let cfg = AgentConfig::new(alg, 3, ScopePins::none(3, 3));
        assert!(run(&mut env, &shape, &cfg, 10, &mut rng, None).is_err());
    }
}

#[test]
fn fully_pinned_slf_equals_factored() {
    let model = sysadmin();
    let a = run_on(&model, &config(&model, Algorithm::SlfUcrl, 0), 3000, 4, false);
    let b = run_on(&model, &config(&model, Algorithm::FactoredUcrl, 0), 3000, 4, false);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.episodes, b.episodes);
}

#[test]
fn runs_are_reproducible() {
    let model = sysadmin();
    for alg in Algorithm::ALL {
        let cfg = config(&model, alg, if alg == Algorithm::SlfUcrl { 3 } else { 0 });
        let a = run_on(&model, &cfg, 1500, 9, true);
        let b = run_on(&model, &cfg, 1500, 9, true);
        assert_eq!(a.steps, b.steps, "{alg}");
        assert_eq!(a.episodes, b.episodes, "{alg}");
    }
}

#[test]
fn policies_are_stationary_within_episodes() {
    let model = sysadmin();
    for alg in Algorithm::ALL {
        let learned = if alg == Algorithm::SlfUcrl { 2 } else { 0 };
        let out = run_on(&model, &config(&model, alg, learned), 3000, 1, false);
        let mut t = 0;
        for ep in &out.episodes {
            let mut seen = vec![None; model.num_states()];
            for st in &out.steps[t..t + ep.length as usize] {
                let prev = seen[st.state].replace(st.action);
                assert!(prev.is_none() || prev == Some(st.action), "{alg} episode {}", ep.k);
            }
            assert_eq!(ep.t_k, t as u64 + 1);
            t += ep.length as usize;
        }
        assert_eq!(t, 3000);
    }
}

#[test]
fn bookkeeping_holds_for_every_variant() {
    let model = sysadmin();
    for alg in Algorithm::ALL {
        for learned in [0, 3] {
            if learned > 0 && alg != Algorithm::SlfUcrl {
                continue;
            }
            let out = run_on(&model, &config(&model, alg, learned), 5000, 2, true);
            assert!(out.counters_consistent && out.sets_monotone, "{alg}");
            assert!(out.episodes.len() as u128 <= out.episode_bound);
            assert!(out.episodes.iter().all(|e| (0.0..=1.0).contains(&e.gain)));
            for e in &out.episodes {
                let audit = e.audit.as_ref().unwrap();
                if audit.concentration {
                    assert!(audit.optimism_margin > -1e-6, "{alg} episode {}", e.k);
                }
                assert!(audit.truth_alive);
            }
        }
    }
}

fn bandit(means: &[f64]) -> Fmdp {
    let states = FactorSpace::new(vec![1]).unwrap();
    let actions = FactorSpace::new(vec![means.len()]).unwrap();
    let joint = states.product(&actions).unwrap();
    let t = TransitionFactor::deterministic(&joint, Scope::new(vec![0]), 1, |_| 0).unwrap();
    let r = RewardFactor::bernoulli_from_fn(&joint, Scope::new(vec![1]), |x| means[x[1]]).unwrap();
    Fmdp::new(states, actions, vec![t], vec![r]).unwrap()
}

#[test]
fn ucrl2_finds_the_best_arm() {
    let model = Arc::new(bandit(&[0.2, 0.8, 0.5]));
    let cfg = AgentConfig::new(Algorithm::Ucrl2, 1, ScopePins::all(&model.transition_scopes(), &model.reward_scopes()));
    let out = run_on(&model, &cfg, 20_000, 3, true);
    let late = &out.steps[10_000..];
    let best = late.iter().filter(|s| s.action == 1).count();
    assert!(best as f64 > 0.95 * late.len() as f64, "{best}");
    assert!(out.regret_at(0.8, 20_000) < 1500.0);
}

#[test]
fn nfa_matches_factored_policy_on_one_factor() {
    let model = Arc::new(common::ring_fmdp(11, 1, 2, 2));
    let (_, policy) = optimum(&model);
    for alg in [Algorithm::FactoredUcrl, Algorithm::NfaDorl] {
        let out = run_on(&model, &config(&model, alg, 0), 20_000, 5, true);
        let late = &out.steps[15_000..];
        let agree = late.iter().filter(|s| s.action == policy[s.state]).count();
        assert!(agree as f64 > 0.9 * late.len() as f64, "{alg}: {agree}");
        assert!(out.episodes.len() as u128 <= out.episode_bound);
        for e in &out.episodes {
            let audit = e.audit.as_ref().unwrap();
            assert!(!audit.concentration || audit.optimism_margin > -1e-6, "{alg}");
        }
    }
}

#[test]
fn episodes_grow_logarithmically() {
    let model = sysadmin();
    let cfg = config(&model, Algorithm::FactoredUcrl, 0);
    let short = run_on(&model, &cfg, 2_000, 0, false).episodes.len();
    let long = run_on(&model, &cfg, 32_000, 0, false).episodes.len();
    assert!(long < 4 * short, "{short} {long}");
}
