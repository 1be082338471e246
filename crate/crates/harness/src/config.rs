//! Run configuration and the agent mini-language.
//!
//! Agents are written `<algorithm>[<i>][:key=value,...]`, e.g. `ucrl2`,
//! `factored-ucrl`, `slf-ucrl4`, `slf-ucrl2:threshold=0.1`. The digit after
//! `slf-ucrl` is the number of transition factors whose scopes are learned;
//! without it every factor is learned. Keys: `radius`, `threshold`,
//! `rewards` (`pinned` or `learned`).

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fmdp_core::agents::{graded_pins, AgentConfig, Algorithm};
use fmdp_core::environments::{BuiltEnv, EnvSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::files::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct AgentSpec {
    pub algorithm: Algorithm,
    /// Learned transition factors for SLF-UCRL; `None` learns all of them.
    pub learned: Option<usize>,
    pub pin_rewards: bool,
    pub radius_scale: f64,
    pub threshold_scale: f64,
}

impl AgentSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            learned: None,
            pin_rewards: true,
            radius_scale: 1.0,
            threshold_scale: 1.0,
        }
    }

    pub fn slf(learned: usize) -> Self {
        Self {
            learned: Some(learned),
            ..Self::new(Algorithm::SlfUcrl)
        }
    }

    /// Name used in file paths and result tables.
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Label for plot legends, e.g. `SLF-UCRL4`.
    pub fn display_name(&self, num_factors: Option<usize>) -> String {
        let base = match self.algorithm {
            Algorithm::SlfUcrl => match self.learned.or(num_factors) {
                Some(i) => format!("SLF-UCRL{i}"),
                None => "SLF-UCRL".into(),
            },
            Algorithm::FactoredUcrl => "Factored-UCRL".into(),
            Algorithm::Ucrl2 => "UCRL2".into(),
            Algorithm::NfaDorl => "NFA-DORL".into(),
        };
        match self.to_string().split_once(':') {
            Some((_, opts)) => format!("{base} ({opts})"),
            None => base,
        }
    }

    pub fn agent_config(&self, env: &BuiltEnv, delta: f64) -> Result<AgentConfig> {
        let d = env.transition_scopes.len();
        let learned = match self.algorithm {
            Algorithm::SlfUcrl => self.learned.unwrap_or(d),
            _ => 0,
        };
        if learned > d {
            return Err(HarnessError::Config(format!(
                "{self}: cannot learn {learned} of {d} transition factors"
            )));
        }
        let pin_rewards = self.pin_rewards || self.algorithm != Algorithm::SlfUcrl;
        let pins = graded_pins(learned, &env.transition_scopes, &env.reward_scopes, pin_rewards);
        let mut cfg = AgentConfig::new(self.algorithm, env.m, pins);
        cfg.delta = delta;
        cfg.radius_scale = self.radius_scale;
        cfg.threshold_scale = self.threshold_scale;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.algorithm)?;
        if let Some(i) = self.learned {
            write!(f, "{i}")?;
        }
        let mut opts = Vec::new();
        if self.radius_scale != 1.0 {
            opts.push(format!("radius={}", self.radius_scale));
        }
        if self.threshold_scale != 1.0 {
            opts.push(format!("threshold={}", self.threshold_scale));
        }
        if !self.pin_rewards {
            opts.push("rewards=learned".into());
        }
        if !opts.is_empty() {
            write!(f, ":{}", opts.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for AgentSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| HarnessError::Config(format!("agent '{s}': {msg}"));
        let (head, opts) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = if let Ok(alg) = head.parse::<Algorithm>() {
            AgentSpec::new(alg)
        } else if let Some(digits) = head.strip_prefix(Algorithm::SlfUcrl.tag()) {
            AgentSpec::slf(digits.parse().map_err(|_| bad("unknown algorithm".into()))?)
        } else {
            return Err(bad("unknown algorithm".into()));
        };
        for kv in opts.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("expected key=value, got '{kv}'")))?;
            let num = || v.parse::<f64>().map_err(|_| bad(format!("bad number '{v}'")));
            match k {
                "radius" => spec.radius_scale = num()?,
                "threshold" => spec.threshold_scale = num()?,
                "rewards" => {
                    spec.pin_rewards = match v {
                        "pinned" => true,
                        "learned" => false,
                        _ => return Err(bad(format!("rewards must be pinned or learned, got '{v}'"))),
                    }
                }
                _ => return Err(bad(format!("unknown key '{k}'"))),
            }
        }
        Ok(spec)
    }
}

impl From<AgentSpec> for String {
    fn from(a: AgentSpec) -> String {
        a.to_string()
    }
}

impl TryFrom<String> for AgentSpec {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: String,
    pub agents: Vec<AgentSpec>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub out_dir: PathBuf,
    pub parallelism: usize,
    /// Points of the aggregate time grid.
    pub grid_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "sysadmin:circular:n=4".into(),
            agents: vec![
                AgentSpec::new(Algorithm::SlfUcrl),
                AgentSpec::new(Algorithm::FactoredUcrl),
                AgentSpec::new(Algorithm::Ucrl2),
            ],
            horizon: 30_000,
            seeds: (0..10).collect(),
            delta: 0.01,
            out_dir: PathBuf::from("results"),
            parallelism: 1,
            grid_points: 200,
        }
    }
}

/// Fields a configuration file may set; each one overrides the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub env: Option<String>,
    pub agents: Option<Vec<AgentSpec>>,
    pub horizon: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub delta: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub grid_points: Option<usize>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn apply(self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        take!(env, agents, horizon, seeds, delta, out_dir, parallelism, grid_points);
    }
}

#[derive(Serialize)]
struct HashedFields<'a> {
    env: &'a str,
    agents: &'a [AgentSpec],
    horizon: u64,
    seeds: &'a [u64],
    delta: f64,
    grid_points: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<EnvSpec> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.seeds.is_empty() || self.agents.is_empty() {
            return bad("need at least one seed and one agent");
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0,1)");
        }
        if self.parallelism == 0 || self.grid_points == 0 {
            return bad("parallelism and grid points must be positive");
        }
        let labels: HashSet<String> = self.agents.iter().map(AgentSpec::label).collect();
        if labels.len() != self.agents.len() {
            return bad("agents must be distinct");
        }
        self.env.parse::<EnvSpec>().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Hash of everything that determines the result files.
    pub fn hash(&self) -> String {
        let fields = HashedFields {
            env: &self.env,
            agents: &self.agents,
            horizon: self.horizon,
            seeds: &self.seeds,
            delta: self.delta,
            grid_points: self.grid_points,
        };
        sha256_hex(toml::to_string(&fields).expect("plain fields serialize").as_bytes())
    }
}

/// `"0..10"` or `"1,2,5"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || HarnessError::Config(format!("bad seed list '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_roundtrip() {
        for s in ["ucrl2", "factored-ucrl", "slf-ucrl", "slf-ucrl3", "slf-ucrl0:radius=0.01", "slf-ucrl:threshold=0.1,rewards=learned", "nfa-dorl"] {
            let a: AgentSpec = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!("ucrl3".parse::<AgentSpec>().is_err());
        assert!("slf-ucrl:foo=1".parse::<AgentSpec>().is_err());
        assert_eq!("slf-ucrl2".parse::<AgentSpec>().unwrap().display_name(Some(4)), "SLF-UCRL2");
        assert_eq!("slf-ucrl".parse::<AgentSpec>().unwrap().display_name(Some(4)), "SLF-UCRL4");
    }

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 7").unwrap(), vec![4, 7]);
        assert!(parse_seeds("3..3").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
        c.seeds = vec![1];
        c.horizon = 0;
        assert!(c.validate().is_err());
        c.horizon = 5;
        c.env = "sysadmin:ring:n=4".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_win_and_hash_ignores_placement() {
        let mut c = RunConfig::default();
        let h = c.hash();
        ConfigOverrides::from_toml("horizon = 10\nagents = [\"ucrl2\"]\n").unwrap().apply(&mut c);
        assert_eq!(c.horizon, 10);
        assert_eq!(c.agents, vec![AgentSpec::new(Algorithm::Ucrl2)]);
        assert_ne!(c.hash(), h);
        let h = c.hash();
        c.parallelism = 8;
        c.out_dir = "elsewhere".into();
        assert_eq!(c.hash(), h);
        assert!(ConfigOverrides::from_toml("horizn = 3").is_err());
    }
}
