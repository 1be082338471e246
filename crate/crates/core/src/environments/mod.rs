//! Benchmark environments and the simulator interface the learners drive.

pub mod lower_bound;
pub mod random;
pub mod sysadmin;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FmdpError, Result};
use crate::model::{Fmdp, StepRecord};
use crate::space::Scope;

pub use lower_bound::{build_lower_bound, LowerBoundConfig, LowerBoundLayout};
pub use random::{build_random_fmdp, PlantedFmdp, RandomFmdpConfig};
pub use sysadmin::{build_sysadmin, SysAdminConfig, Topology};

/// Minimal online interface: the current state and one step at a time.
pub trait Environment {
    fn state(&self) -> usize;
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> StepRecord;
}

/// Simulator of an [`Fmdp`].
#[derive(Debug, Clone)]
pub struct FmdpEnv {
    model: Arc<Fmdp>,
    initial: usize,
    state: usize,
    t: u64,
}

impl FmdpEnv {
    pub fn new(model: Arc<Fmdp>, initial: usize) -> Self {
        Self {
            model,
            initial,
            state: initial,
            t: 1,
        }
    }

    pub fn model(&self) -> &Arc<Fmdp> {
        &self.model
    }
}

impl Environment for FmdpEnv {
    fn state(&self) -> usize {
        self.state
    }

    fn reset(&mut self) -> usize {
        self.state = self.initial;
        self.t = 1;
        self.state
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> StepRecord {
        let rec = self.model.sample_step(self.state, action, self.t, rng);
        self.state = rec.next_state;
        self.t += 1;
        rec
    }
}

/// A named environment from the environment mini-language, e.g. `sysadmin:circular:n=4`,
/// `lowerbound:d=4,w=2,m=1,a=4` or `random:seed=7`.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    SysAdmin(SysAdminConfig),
    LowerBound { config: LowerBoundConfig, seed: u64 },
    Random(RandomFmdpConfig),
}

/// A built environment with its ground truth.
#[derive(Debug, Clone)]
pub struct BuiltEnv {
    pub model: Arc<Fmdp>,
    pub initial_state: usize,
    pub transition_scopes: Vec<Scope>,
    pub reward_scopes: Vec<Scope>,
    /// Largest true scope size.
    pub m: usize,
}

impl BuiltEnv {
    fn from_model(model: Fmdp, initial_state: usize) -> Self {
        let transition_scopes = model.transition_scopes();
        let reward_scopes = model.reward_scopes();
        let m = model.max_scope_size().max(1);
        Self {
            model: Arc::new(model),
            initial_state,
            transition_scopes,
            reward_scopes,
            m,
        }
    }

    pub fn simulator(&self) -> FmdpEnv {
        FmdpEnv::new(self.model.clone(), self.initial_state)
    }
}

impl EnvSpec {
    pub fn build(&self) -> Result<BuiltEnv> {
        match self {
            EnvSpec::SysAdmin(cfg) => {
                let model = build_sysadmin(cfg)?;
                Ok(BuiltEnv::from_model(model, sysadmin::sysadmin_initial_state(cfg)))
            }
            EnvSpec::LowerBound { config, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let (model, _) = build_lower_bound(config, &mut rng)?;
                Ok(BuiltEnv::from_model(model, lower_bound::lower_bound_initial_state()))
            }
            EnvSpec::Random(cfg) => {
                let planted = build_random_fmdp(cfg)?;
                let mut env = BuiltEnv::from_model(planted.model, 0);
                env.m = cfg.m;
                Ok(env)
            }
        }
    }
}

fn parse_params(text: &str) -> Result<Vec<(String, String)>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| FmdpError::Format(format!("expected key=value, got '{kv}'")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| FmdpError::Format(format!("bad value '{v}' for '{key}'")))
}

impl FromStr for EnvSpec {
    type Err = FmdpError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let kind = parts.next().unwrap_or_default();
        match kind {
            "sysadmin" => {
                let topo = match parts.next() {
                    Some("circular") => Topology::Circular,
                    Some("star") => Topology::Star,
                    other => return Err(FmdpError::Format(format!("unknown topology {other:?}"))),
                };
                let mut cfg = SysAdminConfig::new(topo, 4);
                for (k, v) in parse_params(parts.next().unwrap_or(""))? {
                    match k.as_str() {
                        "n" => cfg.servers = num(&k, &v)?,
                        "fail" => cfg.fail_base = num(&k, &v)?,
                        "boost" => cfg.fail_neighbor_boost = num(&k, &v)?,
                        "reboot" => cfg.reboot_success = num(&k, &v)?,
                        "recover" => cfg.spontaneous_recovery = num(&k, &v)?,
                        _ => return Err(FmdpError::Format(format!("unknown sysadmin key '{k}'"))),
                    }
                }
                Ok(EnvSpec::SysAdmin(cfg))
            }
            "lowerbound" => {
                let rest = [parts.next(), parts.next()].into_iter().flatten().collect::<Vec<_>>().join(",");
                let mut cfg = LowerBoundConfig::new(4, 2, 1, 4);
                let mut seed = 0;
                for (k, v) in parse_params(&rest)? {
                    match k.as_str() {
                        "d" => cfg.d = num(&k, &v)?,
                        "w" => cfg.w = num(&k, &v)?,
                        "m" => cfg.m = num(&k, &v)?,
                        "a" => cfg.arms = num(&k, &v)?,
                        "gap" => cfg.gap = num(&k, &v)?,
                        "seed" => seed = num(&k, &v)?,
                        _ => return Err(FmdpError::Format(format!("unknown lowerbound key '{k}'"))),
                    }
                }
                Ok(EnvSpec::LowerBound { config: cfg, seed })
            }
            "random" => {
                let rest = [parts.next(), parts.next()].into_iter().flatten().collect::<Vec<_>>().join(",");
                let mut cfg = RandomFmdpConfig::new(3, 4, 1, 2, 1, 0);
                for (k, v) in parse_params(&rest)? {
                    match k.as_str() {
                        "d" => cfg.d = num(&k, &v)?,
                        "n" => cfg.n = num(&k, &v)?,
                        "m" => cfg.m = num(&k, &v)?,
                        "w" => cfg.w = num(&k, &v)?,
                        "l" => cfg.l = num(&k, &v)?,
                        "seed" => cfg.seed = num(&k, &v)?,
                        "conc" => cfg.concentration = num(&k, &v)?,
                        _ => return Err(FmdpError::Format(format!("unknown random key '{k}'"))),
                    }
                }
                Ok(EnvSpec::Random(cfg))
            }
            _ => Err(FmdpError::Format(format!("unknown environment '{s}'"))),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::SysAdmin(c) => {
                let topo = match c.topology {
                    Topology::Circular => "circular",
                    Topology::Star => "star",
                };
                write!(
                    f,
                    "sysadmin:{topo}:n={},fail={},boost={},reboot={},recover={}",
                    c.servers, c.fail_base, c.fail_neighbor_boost, c.reboot_success, c.spontaneous_recovery
                )
            }
            EnvSpec::LowerBound { config: c, seed } => write!(
                f,
                "lowerbound:d={},w={},m={},a={},gap={},seed={seed}",
                c.d, c.w, c.m, c.arms, c.gap
            ),
            EnvSpec::Random(c) => write!(
                f,
                "random:d={},n={},m={},w={},l={},seed={},conc={}",
                c.d, c.n, c.m, c.w, c.l, c.seed, c.concentration
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let s: EnvSpec = "sysadmin:circular:n=4".parse().unwrap();
        assert_eq!(s, EnvSpec::SysAdmin(SysAdminConfig::new(Topology::Circular, 4)));
        let s: EnvSpec = "lowerbound:d=4,w=2,m=1,a=4".parse().unwrap();
        assert!(matches!(s, EnvSpec::LowerBound { ref config, seed: 0 } if config.d == 4 && config.arms == 4));
        let s: EnvSpec = "random:seed=9".parse().unwrap();
        assert!(matches!(s, EnvSpec::Random(ref c) if c.seed == 9));
        assert!("grid:n=3".parse::<EnvSpec>().is_err());
        assert!("sysadmin:ring:n=3".parse::<EnvSpec>().is_err());
    }

    #[test]
    fn display_roundtrip() {
        for text in ["sysadmin:star:n=5", "lowerbound:d=8,w=3,m=2,a=2", "random:seed=4,d=2,n=3"] {
            let spec: EnvSpec = text.parse().unwrap();
            let again: EnvSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
    }
}
