use fmdp_core::environments::lower_bound::window_start;
use fmdp_core::environments::{
    build_lower_bound, build_random_fmdp, build_sysadmin, EnvSpec, Environment, FmdpEnv, LowerBoundConfig,
    RandomFmdpConfig, SysAdminConfig, Topology,
};
use fmdp_core::io::{model_from_str, model_to_string};
use fmdp_core::planner::{evi_solve, EviOptions};
use fmdp_core::space::Scope;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[test]
fn sysadmin_shape() {
    let m = build_sysadmin(&SysAdminConfig::new(Topology::Circular, 4)).unwrap();
    assert_eq!(m.num_states() * m.num_actions(), 80);
    assert_eq!(m.num_state_factors(), 4);
    assert_eq!(m.action_space().sizes(), &[5]);
    for (i, z) in m.transition_scopes().iter().enumerate() {
        assert_eq!(z, &Scope::new(vec![i, (i + 3) % 4, 4]));
    }
    for (j, z) in m.reward_scopes().iter().enumerate() {
        assert_eq!(z, &Scope::new(vec![j]));
    }
    assert!(build_sysadmin(&SysAdminConfig::new(Topology::Star, 1)).is_err());
    let mut bad = SysAdminConfig::new(Topology::Star, 3);
    bad.fail_base = 1.5;
    assert!(build_sysadmin(&bad).is_err());
}

#[test]
fn sysadmin_deterministic_gain_is_one() {
    let mut cfg = SysAdminConfig::new(Topology::Circular, 3);
    cfg.reboot_success = 1.0;
    cfg.fail_base = 0.0;
    cfg.fail_neighbor_boost = 0.0;
    let m = build_sysadmin(&cfg).unwrap();
    // rebooting server 0 from "only 0 failed" fixes it for sure
    let x = m.joint_tuple(0b110, 0);
    assert_eq!(m.next_state_support(&x), vec![(0b111, 1.0)]);
    let g = evi_solve(&m.flatten().unwrap(), &EviOptions::with_tol(1e-9)).unwrap().gain;
    assert!((g - 1.0).abs() < 1e-7);
}

#[test]
fn sysadmin_fail_probability_is_clipped() {
    let mut cfg = SysAdminConfig::new(Topology::Circular, 3);
    cfg.fail_base = 0.8;
    cfg.fail_neighbor_boost = 0.8;
    let m = build_sysadmin(&cfg).unwrap();
    let x = [0, 1, 1, 3];
    assert_eq!(m.factor_prob(1, &x, 0), 1.0);
}

fn lb_model(seed: u64) -> (fmdp_core::Fmdp, fmdp_core::environments::LowerBoundLayout, LowerBoundConfig) {
    let cfg = LowerBoundConfig::new(4, 2, 1, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, layout) = build_lower_bound(&cfg, &mut rng).unwrap();
    (m, layout, cfg)
}

#[test]
fn lower_bound_layout() {
    let (m, layout, cfg) = lb_model(0);
    assert_eq!(cfg.block_length(), 4);
    // counter + log d location bits + d values + d reward bits + tree
    assert_eq!(m.num_state_factors(), 1 + 2 + 4 + 4 + 2);
    assert_eq!(m.state_space().size(layout.counter), 4);
    for &v in &layout.values {
        assert_eq!(m.state_space().size(v), cfg.w + 1);
        assert_eq!(m.transitions()[v].scope.len(), 2 + 1);
    }
    for &b in &layout.reward_bits {
        assert_eq!(m.transitions()[b].scope.len(), cfg.m + 1);
    }
    for &t in layout.tree.iter().flatten() {
        assert_eq!(m.transitions()[t].scope.len(), 3);
    }
    let rz = &m.reward_scopes()[0];
    assert_eq!(rz, &Scope::new(vec![layout.counter, layout.last_bits()[0], layout.last_bits()[1]]));
    assert_eq!(window_start(&[1, 0]), 2);
    assert!(build_lower_bound(&LowerBoundConfig::new(6, 2, 1, 2), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn lower_bound_counter_cycles_and_reward_timing() {
    let (m, layout, cfg) = lb_model(1);
    let m = Arc::new(m);
    let mut env = FmdpEnv::new(m.clone(), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let log_d = cfg.log_d();
    let mut cur_block_hit = false;
    for t in 0..100_000u64 {
        let s = env.state();
        let v = m.state_space().decode(s);
        assert_eq!(v[layout.counter], (t % 4) as usize);
        if v[layout.counter] == 3 {
            cur_block_hit = false;
        }
        let rec = env.step(rng.random_range(0..cfg.arms), &mut rng);
        let last = layout.last_bits();
        let or_bit = v[last[0]] == 1 || v[last[1]] == 1;
        if rec.reward() != 0.0 {
            assert_eq!(v[layout.counter], log_d + 1);
            assert!(or_bit);
        }
        // at most one reward bit set per block
        let nv = m.state_space().decode(rec.next_state);
        let bits: usize = layout.reward_bits.iter().map(|&b| nv[b]).sum();
        assert!(bits <= 1);
        if bits == 1 {
            assert!(!cur_block_hit);
            cur_block_hit = true;
        }
    }
}

#[test]
fn lower_bound_tree_computes_or() {
    // exhaustive over counter-2 states with arbitrary reward bits
    let (m, layout, _) = lb_model(3);
    let space = m.state_space();
    for bits in 0..16usize {
        let mut v = vec![0; space.num_factors()];
        v[layout.counter] = 2;
        for (k, &b) in layout.reward_bits.iter().enumerate() {
            v[b] = (bits >> k) & 1;
        }
        let s = space.encode(&v).unwrap();
        let x = m.joint_tuple(s, 0);
        for (next, _) in m.next_state_support(&x) {
            let nv = space.decode(next);
            let last = layout.last_bits();
            assert_eq!(nv[last[0]] == 1 || nv[last[1]] == 1, bits != 0, "bits {bits:04b}");
        }
    }
}

#[test]
fn lower_bound_zero_means_pay_nothing() {
    let mut cfg = LowerBoundConfig::new(4, 2, 1, 2);
    cfg.means = Some(vec![0.0; cfg.num_bandits() * cfg.arms]);
    let (m, _) = build_lower_bound(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut env = FmdpEnv::new(Arc::new(m), 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let total: f64 = (0..20_000).map(|_| env.step(rng.random_range(0..2), &mut rng).reward()).sum();
    assert_eq!(total, 0.0);
}

#[test]
fn lower_bound_means_table() {
    let cfg = LowerBoundConfig::new(4, 2, 1, 3);
    let means = cfg.draw_means(&mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(means.len(), 8 * 3);
    for b in 0..8 {
        let row = &means[b * 3..b * 3 + 3];
        assert_eq!(row.iter().filter(|&&p| (p - 0.6).abs() < 1e-12).count(), 1);
        assert_eq!(row.iter().filter(|&&p| p == 0.5).count(), 2);
    }
}

#[test]
fn random_fmdp_is_seeded_and_planted() {
    let cfg = RandomFmdpConfig::new(3, 4, 2, 2, 2, 17);
    let a = build_random_fmdp(&cfg).unwrap();
    let b = build_random_fmdp(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.model.transition_scopes(), a.transition_scopes);
    assert!(a.transition_scopes.iter().all(|z| z.len() == 2));
    assert!(a.model.flatten().unwrap().is_communicating());
    let other = build_random_fmdp(&RandomFmdpConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.model, other.model);
}

#[test]
fn near_uniform_rows_have_small_diameter() {
    let mut cfg = RandomFmdpConfig::new(2, 3, 1, 2, 1, 4);
    cfg.concentration = 1e6;
    let p = build_random_fmdp(&cfg).unwrap();
    let d = p.model.flatten().unwrap().diameter().unwrap();
    // every state is reached w.p. about 1/4 per step
    assert!(d.is_finite() && d < 4.5, "{d}");
}

#[test]
fn generated_models_roundtrip() {
    for spec in ["sysadmin:star:n=3", "lowerbound:d=4,w=2,m=1,a=2", "random:seed=3"] {
        let built = spec.parse::<EnvSpec>().unwrap().build().unwrap();
        let text = model_to_string(&built.model).unwrap();
        assert_eq!(model_from_str(&text).unwrap(), *built.model);
    }
}

#[test]
fn simulator_reset_and_determinism() {
    let built = "sysadmin:circular:n=3".parse::<EnvSpec>().unwrap().build().unwrap();
    let run = |seed| {
        let mut env = built.simulator();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..200).map(|t| env.step(t % 4, &mut rng).next_state).collect::<Vec<_>>()
    };
    assert_eq!(run(1), run(1));
    let mut env = built.simulator();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    env.step(0, &mut rng);
    assert_eq!(env.reset(), built.initial_state);
    assert_eq!(built.initial_state, 0b111);
}

#[test]
fn slf_recovers_planted_scopes_with_strict_threshold() {
    use fmdp_core::agents::{graded_pins, run, AgentConfig, Algorithm, ProblemShape, Truth};
    let mut recovered = 0;
    for seed in 0..10 {
        let p = build_random_fmdp(&RandomFmdpConfig::new(3, 4, 1, 2, 1, seed)).unwrap();
        let model = Arc::new(p.model);
        let pins = graded_pins(3, &p.transition_scopes, &p.reward_scopes, true);
        let mut cfg = AgentConfig::new(Algorithm::SlfUcrl, 1, pins);
        cfg.threshold_scale = 0.1;
        let lambda_star = evi_solve(&model.flatten().unwrap(), &EviOptions::with_tol(1e-9)).unwrap().gain;
        let mut env = FmdpEnv::new(Arc::clone(&model), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let truth = Truth { model: Arc::clone(&model), lambda_star };
        let out = run(&mut env, &ProblemShape::of(&model), &cfg, 100_000, &mut rng, Some(truth)).unwrap();
        let audit = out.episodes.last().unwrap().audit.clone().unwrap();
        if audit.truth_alive && audit.wrong_transition.iter().all(|&w| w == 0) {
            recovered += 1;
        }
    }
    assert!(recovered >= 8, "{recovered}/10");
}
