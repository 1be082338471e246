//! SysAdmin: a network of servers that fail and can be rebooted one at a time.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{Fmdp, RewardFactor, TransitionFactor};
use crate::space::{FactorSpace, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Server i depends on server i-1 (mod N).
    Circular,
    /// Server 0 is the root; every other server depends on it.
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SysAdminConfig {
    pub topology: Topology,
    pub servers: usize,
    pub fail_base: f64,
    pub fail_neighbor_boost: f64,
    pub reboot_success: f64,
    pub spontaneous_recovery: f64,
}

impl SysAdminConfig {
    pub fn new(topology: Topology, servers: usize) -> Self {
        Self {
            topology,
            servers,
            fail_base: 0.05,
            fail_neighbor_boost: 0.3,
            reboot_success: 0.95,
            spontaneous_recovery: 0.0,
        }
    }

    /// The server whose status server `i` depends on, if any.
    pub fn neighbor(&self, i: usize) -> Option<usize> {
        match self.topology {
            Topology::Circular => Some((i + self.servers - 1) % self.servers),
            Topology::Star if i == 0 => None,
            Topology::Star => Some(0),
        }
    }

    /// True transition scope of server `i` (the action is factor `N`).
    pub fn scope(&self, i: usize) -> Scope {
        let mut z = vec![i, self.servers];
        z.extend(self.neighbor(i));
        Scope::new(z)
    }
}

/// Status 1 means working. Action `i < N` reboots server `i`; action `N` idles.
/// Reward factor `j` is the status of server `j`.
pub fn build_sysadmin(cfg: &SysAdminConfig) -> Result<Fmdp> {
    let n = cfg.servers;
    if n < 2 {
        return domain("SysAdmin needs at least two servers");
    }
    for p in [cfg.fail_base, cfg.fail_neighbor_boost, cfg.reboot_success, cfg.spontaneous_recovery] {
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("probability {p} outside [0,1]"));
        }
    }
    let states = FactorSpace::new(vec![2; n])?;
    let actions = FactorSpace::new(vec![n + 1])?;
    let joint = states.product(&actions)?;
    let mut trans = Vec::with_capacity(n);
    for i in 0..n {
        let nb = cfg.neighbor(i);
        trans.push(TransitionFactor::from_fn(&joint, cfg.scope(i), 2, |x| {
            let work = if x[n] == i {
                cfg.reboot_success
            } else if x[i] == 1 {
                let failed_nb = nb.is_some_and(|k| x[k] == 0);
                let fail = cfg.fail_base + if failed_nb { cfg.fail_neighbor_boost } else { 0.0 };
                1.0 - fail.clamp(0.0, 1.0)
            } else {
                cfg.spontaneous_recovery
            };
            vec![1.0 - work, work]
        })?);
    }
    let rewards = (0..n)
        .map(|j| RewardFactor::bernoulli_from_fn(&joint, Scope::new(vec![j]), |x| x[j] as f64))
        .collect::<Result<Vec<_>>>()?;
    Fmdp::new(states, actions, trans, rewards)
}

/// Initial state: every server working.
pub fn sysadmin_initial_state(cfg: &SysAdminConfig) -> usize {
    (1 << cfg.servers) - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_scopes() {
        let m = build_sysadmin(&SysAdminConfig::new(Topology::Circular, 4)).unwrap();
        assert_eq!(m.num_states() * m.num_actions(), 80);
        assert!(m.transitions().iter().all(|t| t.scope.len() == 3));
        assert_eq!(m.transitions()[0].scope, Scope::new(vec![0, 3, 4]));
        let star = build_sysadmin(&SysAdminConfig::new(Topology::Star, 4)).unwrap();
        assert_eq!(star.transitions()[0].scope, Scope::new(vec![0, 4]));
        assert_eq!(star.transitions()[2].scope, Scope::new(vec![0, 2, 4]));
    }

    #[test]
    fn all_working_idle_pays_one() {
        let cfg = SysAdminConfig::new(Topology::Circular, 4);
        let m = build_sysadmin(&cfg).unwrap();
        let x = m.joint_tuple(sysadmin_initial_state(&cfg), 4);
        assert_eq!(m.reward_mean(&x), 1.0);
    }

    #[test]
    fn failure_probabilities() {
        let cfg = SysAdminConfig::new(Topology::Circular, 3);
        let m = build_sysadmin(&cfg).unwrap();
        // server 1 working, neighbor 0 failed, idle
        let x = [0, 1, 1, 3];
        assert!((m.factor_prob(1, &x, 0) - 0.35).abs() < 1e-12);
        // server 1 rebooted
        let x = [0, 0, 1, 1];
        assert!((m.factor_prob(1, &x, 1) - 0.95).abs() < 1e-12);
    }
}
