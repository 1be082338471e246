//! Random factored MDPs with planted scopes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, FmdpError, Result};
use crate::model::{Fmdp, RewardFactor, RewardTable, TransitionFactor};
use crate::space::{FactorSpace, Scope, ScopeIndexer};

/// Resampling attempts before giving up on a communicating model.
pub const COMMUNICATING_BUDGET: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFmdpConfig {
    /// State factors.
    pub d: usize,
    /// State plus action factors.
    pub n: usize,
    pub m: usize,
    pub w: usize,
    /// Reward factors.
    pub l: usize,
    pub seed: u64,
    /// Dirichlet concentration of transition rows.
    pub concentration: f64,
}

impl RandomFmdpConfig {
    pub fn new(d: usize, n: usize, m: usize, w: usize, l: usize, seed: u64) -> Self {
        Self {
            d,
            n,
            m,
            w,
            l,
            seed,
            concentration: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFmdp {
    pub model: Fmdp,
    pub transition_scopes: Vec<Scope>,
    pub reward_scopes: Vec<Scope>,
}

fn dirichlet<R: Rng + ?Sized>(k: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive concentration");
    let mut v: Vec<f64> = (0..k).map(|_| g.sample(rng).max(1e-300)).collect();
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    // exact normalization of the last entry keeps rows within the sum tolerance
    let head: f64 = v[..k - 1].iter().sum();
    v[k - 1] = (1.0 - head).max(0.0);
    v
}

fn random_scope<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Scope {
    Scope::new(sample(rng, n, m).into_vec())
}

/// Draw scopes, rows and reward means; resample until the flattened model
/// is communicating.
pub fn build_random_fmdp(cfg: &RandomFmdpConfig) -> Result<PlantedFmdp> {
    if cfg.d == 0 || cfg.n <= cfg.d || cfg.m == 0 || cfg.m > cfg.n || cfg.w < 2 || cfg.l == 0 {
        return domain("need 0 < d < n, 0 < m <= n, W >= 2 and l >= 1");
    }
    if !(cfg.concentration > 0.0) {
        return domain("concentration must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states = FactorSpace::new(vec![cfg.w; cfg.d])?;
    let actions = FactorSpace::new(vec![cfg.w; cfg.n - cfg.d])?;
    let joint = states.product(&actions)?;
    for _ in 0..COMMUNICATING_BUDGET {
        let tscopes: Vec<Scope> = (0..cfg.d).map(|_| random_scope(cfg.n, cfg.m, &mut rng)).collect();
        let rscopes: Vec<Scope> = (0..cfg.l).map(|_| random_scope(cfg.n, cfg.m, &mut rng)).collect();
        let mut trans = Vec::with_capacity(cfg.d);
        for z in &tscopes {
            let cells = ScopeIndexer::new(&joint, z)?.cells();
            let probs = (0..cells).flat_map(|_| dirichlet(cfg.w, cfg.concentration, &mut rng)).collect();
            trans.push(TransitionFactor { scope: z.clone(), probs });
        }
        let mut rewards = Vec::with_capacity(cfg.l);
        for z in &rscopes {
            let cells = ScopeIndexer::new(&joint, z)?.cells();
            let means = (0..cells).map(|_| rng.random::<f64>()).collect();
            rewards.push(RewardFactor {
                scope: z.clone(),
                table: RewardTable::Bernoulli { means },
            });
        }
        let model = Fmdp::new(states.clone(), actions.clone(), trans, rewards)?;
        if model.flatten()?.is_communicating() {
            return Ok(PlantedFmdp {
                model,
                transition_scopes: tscopes,
                reward_scopes: rscopes,
            });
        }
    }
    Err(FmdpError::InvalidModel(format!(
        "no communicating model within {COMMUNICATING_BUDGET} draws"
    )))
}
