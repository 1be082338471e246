use std::sync::Arc;

use fmdp_core::environments::{build_random_fmdp, RandomFmdpConfig};
use fmdp_core::estimator::{ConfidenceParams, EmpiricalSnapshot, ScopeCounters, ScopeFamily};
use fmdp_core::io::{from_toml, to_toml};
use fmdp_core::space::{FactorSpace, Scope};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_setup() -> (FactorSpace, FactorSpace, Arc<ScopeFamily>) {
    let states = FactorSpace::new(vec![2, 3]).unwrap();
    let actions = FactorSpace::new(vec![2]).unwrap();
    let joint = states.product(&actions).unwrap();
    let fam = Arc::new(ScopeFamily::structure_learning(&joint, 1, &[]).unwrap());
    (states, actions, fam)
}

fn random_step(rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let x = vec![rng.random_range(0..2), rng.random_range(0..3), rng.random_range(0..2)];
    let next = vec![rng.random_range(0..2), rng.random_range(0..3)];
    (x, next, vec![rng.random_range(0.0..1.0)])
}

#[test]
fn tau_example() {
    let p = ConfidenceParams::new(0.01, 4, 2, 8).unwrap();
    assert!((p.tau(1) - 10.5558).abs() < 1e-4);
    assert!((p.tau(1) - 38400f64.ln()).abs() < 1e-12);
}

#[test]
fn unvisited_cell_radii() {
    let (_, _, fam) = small_setup();
    let c = ScopeCounters::new(fam.clone(), vec![2, 3], 1);
    let params = ConfidenceParams::for_family(0.01, &FactorSpace::new(vec![2, 3]).unwrap(), &fam).unwrap();
    let snap = c.snapshot(&params);
    let tau = snap.tau();
    for id in 0..fam.len() {
        assert_eq!(snap.p_bar(id, 0, 0, 1), 0.0);
        assert!((snap.eps_trans(id, 0, 0, 1) - 18.0 * tau).abs() < 1e-12);
        assert!((snap.eps_reward(id, 0) - (18.0 * tau).sqrt()).abs() < 1e-12);
        assert_eq!(snap.w_trans(id, 0, 0, 1), 0.0);
    }
}

#[test]
fn ratio_example() {
    let (_, _, fam) = small_setup();
    let mut c = ScopeCounters::new(fam.clone(), vec![2, 3], 1);
    for k in 0..4 {
        c.record(&[1, 2, 0], &[usize::from(k < 3), 0], &[1.0]);
    }
    c.roll_episode();
    let params = ConfidenceParams::new(0.01, 2, 3, 6).unwrap();
    let snap = c.snapshot(&params);
    let id = fam.id(&Scope::new(vec![0])).unwrap();
    let cell = fam.indexer(id).cell(&[1, 2, 0]);
    assert_eq!(snap.count(id, cell), 4.0);
    assert_eq!(snap.p_bar(id, 0, cell, 1), 0.75);
}

#[test]
fn doubling_guard() {
    let (_, _, fam) = small_setup();
    let mut c = ScopeCounters::new(fam, vec![2, 3], 1);
    let x = [0, 1, 1];
    assert!(!c.doubling_triggered(&x));
    c.record(&x, &[0, 0], &[0.0]);
    assert!(c.doubling_triggered(&x));
    c.roll_episode();
    for _ in 0..3 {
        c.record(&x, &[0, 0], &[0.0]);
    }
    c.roll_episode();
    // N = 4 everywhere on x's cells
    for k in 0..4 {
        assert!(!c.doubling_triggered(&x), "nu={k}");
        c.record(&x, &[0, 0], &[0.0]);
    }
    assert!(c.doubling_triggered(&x));
    // one fresh cell in one scope suffices
    c.roll_episode();
    let y = [0, 1, 0];
    assert!(!c.doubling_triggered(&y));
    c.record(&y, &[0, 0], &[0.0]);
    assert!(c.doubling_triggered(&y));
}

#[test]
fn episode_separation() {
    let (_, _, fam) = small_setup();
    let mut c = ScopeCounters::new(fam.clone(), vec![2, 3], 1);
    let x = [1, 0, 1];
    c.record(&x, &[1, 1], &[0.5]);
    c.record(&x, &[1, 1], &[0.5]);
    for id in 0..fam.len() {
        let cell = fam.indexer(id).cell(&x);
        assert_eq!(c.nu(id, cell), 2);
        assert_eq!(c.nu_trans(id, 1, cell, 1), 2);
        assert_eq!(c.n(id, cell), 0);
    }
    c.roll_episode();
    c.record(&x, &[1, 1], &[0.5]);
    for id in 0..fam.len() {
        let cell = fam.indexer(id).cell(&x);
        assert_eq!((c.n(id, cell), c.nu(id, cell)), (2, 1));
    }
    assert_eq!(c.time(), 4);
    assert_eq!(c.episode_start(), 3);
}

#[test]
fn checkpoint_roundtrip_and_csv() {
    let (_, _, fam) = small_setup();
    let mut c = ScopeCounters::new(fam, vec![2, 3], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (x, nx, r) = random_step(&mut rng);
        c.record(&x, &nx, &r);
    }
    c.roll_episode();
    let text = to_toml(&c).unwrap();
    let back: ScopeCounters = from_toml(&text).unwrap();
    assert_eq!(back, c);
    let params = ConfidenceParams::new(0.01, 2, 3, 6).unwrap();
    let mut csv = Vec::new();
    c.snapshot(&params).export_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("scope,cell,factor,n,p_bar,eps"));
    assert!(csv.lines().count() > 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counter_invariants(seed in any::<u64>(), steps in 1usize..300, rolls in 0usize..6) {
        let (_, _, fam) = small_setup();
        let mut c = ScopeCounters::new(fam, vec![2, 3], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..steps {
            let (x, nx, r) = random_step(&mut rng);
            c.record(&x, &nx, &r);
            if rolls > 0 && k % (steps / rolls + 1) == 0 {
                c.roll_episode();
            }
            prop_assert!(c.check_invariants());
        }
        c.roll_episode();
        prop_assert!(c.check_invariants());
    }

    #[test]
    fn snapshot_ignores_in_episode_counts(seed in any::<u64>(), extra in 1usize..50) {
        let (_, _, fam) = small_setup();
        let mut c = ScopeCounters::new(fam, vec![2, 3], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let (x, nx, r) = random_step(&mut rng);
            c.record(&x, &nx, &r);
        }
        c.roll_episode();
        let params = ConfidenceParams::new(0.01, 2, 3, 6).unwrap();
        let before = c.snapshot(&params);
        for _ in 0..extra {
            let (x, nx, r) = random_step(&mut rng);
            c.record(&x, &nx, &r);
        }
        prop_assert_eq!(c.snapshot(&params), before);
    }

    #[test]
    fn radius_monotone_in_count(seed in 0u64..500, lo in 1.0f64..1e4, factor in 1.0f64..100.0) {
        let planted = build_random_fmdp(&RandomFmdpConfig::new(2, 3, 1, 2, 1, seed)).unwrap();
        let model = planted.model;
        let fam = Arc::new(ScopeFamily::structure_learning(model.joint_space(), 1, &[]).unwrap());
        let params = ConfidenceParams::for_family(0.01, model.state_space(), &fam).unwrap();
        let a = EmpiricalSnapshot::from_model(&model, fam.clone(), &params, lo).unwrap();
        let b = EmpiricalSnapshot::from_model(&model, fam.clone(), &params, lo * factor).unwrap();
        for id in 0..fam.len() {
            for cell in 0..fam.cells(id) {
                prop_assert!(b.eps_reward(id, cell) <= a.eps_reward(id, cell));
                for i in 0..2 {
                    for w in 0..2 {
                        prop_assert!((a.p_bar(id, i, cell, w) - b.p_bar(id, i, cell, w)).abs() < 1e-9);
                        prop_assert!(b.eps_trans(id, i, cell, w) <= a.eps_trans(id, i, cell, w) + 1e-12);
                    }
                }
            }
        }
    }
}

/// Unions with the true scope estimate the true row without bias.
#[test]
fn union_estimates_concentrate() {
    let planted = build_random_fmdp(&RandomFmdpConfig::new(3, 4, 1, 2, 1, 11)).unwrap();
    let model = planted.model;
    let truth = &planted.transition_scopes;
    let joint = model.joint_space().clone();
    let fam = Arc::new(ScopeFamily::structure_learning(&joint, 1, &[]).unwrap());
    let params = ConfidenceParams::for_family(0.01, model.state_space(), &fam).unwrap();
    let (state, action) = (5, 1);
    let x = model.joint_tuple(state, action);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut good = 0;
    let reps = 100;
    for _ in 0..reps {
        let mut c = ScopeCounters::new(fam.clone(), model.state_space().sizes().to_vec(), 1);
        for _ in 0..100_000 {
            let rec = model.sample_step(state, action, 1, &mut rng);
            c.record(&x, &model.state_space().decode(rec.next_state), &rec.reward_factors);
        }
        c.roll_episode();
        let snap = c.snapshot(&params);
        let mut ok = true;
        for (i, zp) in truth.iter().enumerate() {
            for id in 0..fam.len() {
                if !zp.is_subset(fam.scope(id)) {
                    continue;
                }
                let cell = fam.indexer(id).cell(&x);
                for (w, &p) in model.factor_row(i, &x).iter().enumerate() {
                    ok &= (snap.p_bar(id, i, cell, w) - p).abs() <= 3.0 * snap.eps_trans(id, i, cell, w);
                }
            }
        }
        good += usize::from(ok);
    }
    assert!(good >= 99, "{good}/{reps}");
}
