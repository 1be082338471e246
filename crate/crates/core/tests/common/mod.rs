#![allow(dead_code)]

use std::sync::Arc;

use fmdp_core::estimator::{ConfidenceParams, EmpiricalSnapshot, ScopeCounters, ScopeFamily};
use fmdp_core::model::{Fmdp, RewardFactor, TransitionFactor};
use fmdp_core::space::{FactorSpace, Scope};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// FMDP with a single action factor of size `na`; factor `i` depends on
/// itself, its successor and the action; reward `j` on state `j` and the action.
pub fn ring_fmdp(seed: u64, d: usize, w: usize, na: usize) -> Fmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = FactorSpace::new(vec![w; d]).unwrap();
    let actions = FactorSpace::new(vec![na]).unwrap();
    let joint = states.product(&actions).unwrap();
    let trans = (0..d)
        .map(|i| {
            let mut sc = vec![i, d];
            if d > 1 {
                sc.push((i + 1) % d);
            }
            TransitionFactor::from_fn(&joint, Scope::new(sc), w, |_| {
                let raw: Vec<f64> = (0..w).map(|_| rng.random_range(0.05..1.0)).collect();
                let tot: f64 = raw.iter().sum();
                let mut row: Vec<f64> = raw.iter().map(|v| v / tot).collect();
                let head: f64 = row[..w - 1].iter().sum();
                row[w - 1] = 1.0 - head;
                row
            })
            .unwrap()
        })
        .collect();
    let rewards = (0..d)
        .map(|j| RewardFactor::bernoulli_from_fn(&joint, Scope::new(vec![j, d]), |_| rng.random_range(0.0..1.0)).unwrap())
        .collect();
    Fmdp::new(states, actions, trans, rewards).unwrap()
}

/// Snapshot of a model after `steps` uniformly random actions.
pub fn explored_snapshot(
    model: &Fmdp,
    family: Arc<ScopeFamily>,
    steps: u64,
    radius_scale: f64,
    seed: u64,
) -> EmpiricalSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = ScopeCounters::new(family.clone(), model.state_space().sizes().to_vec(), model.num_reward_factors());
    let mut s = 0;
    for t in 1..=steps {
        let a = rng.random_range(0..model.num_actions());
        let rec = model.sample_step(s, a, t, &mut rng);
        c.record(&model.joint_tuple(s, a), &model.state_space().decode(rec.next_state), &rec.reward_factors);
        s = rec.next_state;
    }
    c.roll_episode();
    let params = ConfidenceParams::for_family(0.01, model.state_space(), &family)
        .unwrap()
        .with_radius_scale(radius_scale);
    c.snapshot(&params)
}
