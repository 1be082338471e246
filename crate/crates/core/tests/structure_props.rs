use std::sync::Arc;

use fmdp_core::environments::{build_random_fmdp, RandomFmdpConfig};
use fmdp_core::estimator::{ConfidenceParams, ScopeCounters, ScopeFamily};
use fmdp_core::space::{FactorSpace, Scope};
use fmdp_core::structure::{
    eliminate, max_pairwise_excess, reward_consistent, transition_consistent, ConsistentScopeSets, ScopePins,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three binary joint factors, two of them state factors.
fn setup() -> (Arc<ScopeFamily>, ScopeCounters, ConfidenceParams) {
    let joint = FactorSpace::new(vec![2, 2, 2]).unwrap();
    let fam = Arc::new(ScopeFamily::structure_learning(&joint, 1, &[]).unwrap());
    let c = ScopeCounters::new(fam.clone(), vec![2, 2], 1);
    let p = ConfidenceParams::new(0.01, 2, 2, 2).unwrap();
    (fam, c, p)
}

fn id(fam: &ScopeFamily, z: &[usize]) -> usize {
    fam.id(&Scope::new(z.to_vec())).unwrap()
}

#[test]
fn no_data_everything_consistent() {
    let (fam, c, p) = setup();
    let snap = c.snapshot(&p);
    for &z in fam.base() {
        assert!(transition_consistent(&snap, 0, z, 1.0));
        assert!(transition_consistent(&snap, 1, z, 1.0));
        assert!(reward_consistent(&snap, 0, z, 1.0));
    }
}

#[test]
fn constant_reward_never_eliminates() {
    let (fam, mut c, p) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sets = ConsistentScopeSets::initial(&fam, &ScopePins::none(2, 1)).unwrap();
    for k in 0..20 {
        for _ in 0..2000 {
            let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
            c.record(&x, &[rng.random_range(0..2), rng.random_range(0..2)], &[0.5]);
        }
        c.roll_episode();
        let snap = c.snapshot(&p);
        for &z in fam.base() {
            assert!(reward_consistent(&snap, 0, z, 1.0));
        }
        eliminate(&mut sets, &snap, 1.0, k).unwrap();
        assert_eq!(sets.reward[0].len(), 3);
    }
}

#[test]
fn maximal_violation_is_inconsistent() {
    // factor 0 copies joint factor 1 deterministically
    let (fam, mut c, p) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..40_000 {
        let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
        c.record(&x, &[x[1], 0], &[0.0]);
    }
    c.roll_episode();
    let snap = c.snapshot(&p);
    let (z0, z1, z01) = (id(&fam, &[0]), id(&fam, &[1]), id(&fam, &[0, 1]));
    let v = fam.indexer(z01).cell(&[0, 1, 0]);
    assert_eq!(snap.p_bar(z01, 0, v, 1), 1.0);
    assert!(2.0 * snap.eps_trans(z01, 0, v, 1) < 0.5);
    assert!(!transition_consistent(&snap, 0, z0, 1.0));
    assert!(transition_consistent(&snap, 0, z1, 1.0));
}

#[test]
fn reward_outside_scope_is_inconsistent() {
    let (fam, mut c, p) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut n = 0;
    loop {
        for _ in 0..5000 {
            let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
            c.record(&x, &[0, 0], &[x[2] as f64]);
        }
        n += 5000;
        c.roll_episode();
        let snap = c.snapshot(&p);
        let u = id(&fam, &[0, 2]);
        let radius_small = (0..fam.cells(u)).all(|v| 2.0 * snap.eps_reward(u, v) < 0.5);
        if radius_small {
            assert!(!reward_consistent(&snap, 0, id(&fam, &[0]), 1.0));
            assert!(reward_consistent(&snap, 0, id(&fam, &[2]), 1.0));
            break;
        }
        assert!(n < 1_000_000);
    }
}

#[test]
fn eliminated_scopes_stay_gone() {
    let (fam, mut c, p) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sets = ConsistentScopeSets::initial(&fam, &ScopePins::none(2, 1)).unwrap();
    let all = sets.clone();
    eliminate(&mut sets, &c.snapshot(&p), 1.0, 0).unwrap();
    assert_eq!(sets, all);
    for _ in 0..40_000 {
        let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
        c.record(&x, &[x[1], rng.random_range(0..2)], &[0.0]);
    }
    c.roll_episode();
    let report = eliminate(&mut sets, &c.snapshot(&p), 1.0, 1).unwrap();
    assert!(report.transition[0].contains(&id(&fam, &[0])));
    let gone = report.transition[0].clone();
    // data that would make the dropped scope look fine again does not revive it
    for _ in 0..200_000 {
        let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
        c.record(&x, &[0, 0], &[0.0]);
    }
    c.roll_episode();
    eliminate(&mut sets, &c.snapshot(&p), 1.0, 2).unwrap();
    for z in gone {
        assert!(!sets.transition[0].contains(&z));
    }
}

#[test]
fn pinned_sets_are_untouched() {
    let (fam, mut c, p) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40_000 {
        let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
        c.record(&x, &[x[1], 0], &[0.0]);
    }
    c.roll_episode();
    let pins = ScopePins {
        transition: vec![Some(Scope::new(vec![0])), None],
        reward: vec![None],
    };
    let mut sets = ConsistentScopeSets::initial(&fam, &pins).unwrap();
    eliminate(&mut sets, &c.snapshot(&p), 1.0, 1).unwrap();
    assert_eq!(sets.transition[0], vec![id(&fam, &[0])]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Sets shrink monotonically and survivors obey the triangle bound.
    #[test]
    fn monotone_and_triangle(seed in any::<u64>(), bias in 0.0f64..1.0, scale in 0.05f64..1.0) {
        let (fam, mut c, p) = setup();
        let p = p.with_radius_scale(scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sets = ConsistentScopeSets::initial(&fam, &ScopePins::none(2, 1)).unwrap();
        for k in 0..8 {
            for _ in 0..rng.random_range(10..3000) {
                let x = [rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2)];
                let w0 = usize::from(rng.random_bool(if x[1] == 1 { bias } else { 1.0 - bias }));
                c.record(&x, &[w0, rng.random_range(0..2)], &[x[0] as f64 * bias]);
            }
            c.roll_episode();
            let snap = c.snapshot(&p);
            let before = sets.clone();
            match eliminate(&mut sets, &snap, 1.0, k) {
                Ok(_) => {}
                Err(_) => break,
            }
            prop_assert!(before.contains_all(&sets));
            prop_assert!(max_pairwise_excess(&sets, &snap) <= 1e-12);
        }
    }
}

/// Under uniform exploration of a planted model the true scopes stay consistent.
#[test]
fn planted_scopes_stay_consistent() {
    let mut kept = 0;
    let runs = 100;
    for seed in 0..runs {
        let planted = build_random_fmdp(&RandomFmdpConfig::new(3, 4, 1, 2, 1, seed)).unwrap();
        let model = &planted.model;
        let fam = Arc::new(ScopeFamily::structure_learning(model.joint_space(), 1, &[]).unwrap());
        let params = ConfidenceParams::for_family(0.01, model.state_space(), &fam).unwrap();
        let mut c = ScopeCounters::new(fam.clone(), model.state_space().sizes().to_vec(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut s = 0;
        for t in 1..=100_000u64 {
            let a = rng.random_range(0..model.num_actions());
            let rec = model.sample_step(s, a, t, &mut rng);
            c.record(&model.joint_tuple(s, a), &model.state_space().decode(rec.next_state), &rec.reward_factors);
            s = rec.next_state;
        }
        c.roll_episode();
        let snap = c.snapshot(&params);
        let ok = planted
            .transition_scopes
            .iter()
            .enumerate()
            .all(|(i, z)| transition_consistent(&snap, i, fam.id(z).unwrap(), 1.0));
        kept += usize::from(ok);
    }
    assert!(kept >= 99, "{kept}/{runs}");
}
