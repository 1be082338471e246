//! Scope-indexed visit counters, frozen empirical snapshots and the
//! confidence radii used for elimination and optimism.
//!
//! Radii at episode start `t_k` with `τ = ln(6 d W L t_k / δ)`:
//!
//! ```text
//! ε_{i,Z}(w|v) = sqrt(18 P̄ τ / max{N,1}) + 18 τ / max{N,1}
//! ε_Z(v)       = sqrt(18 τ / max{N,1})
//! 𝒲_{i,Z}(w|v) = min{ε_{i,Z}(w|v), P̄_{i,Z}(w|v)}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::ops::AddAssign;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, FmdpError, Result};
use crate::model::{Fmdp, StepRecord};
use crate::space::{enumerate_scopes, scopes_in_size_range, FactorSpace, Scope, ScopeIndexer};

/// Scopes with at most this many cells use dense storage.
pub const DENSE_CELL_LIMIT: usize = 4096;

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "TableDoc<T>",
    from = "TableDoc<T>",
    bound = "T: Copy + Default + PartialEq + Serialize + for<'a> Deserialize<'a>"
)]
pub enum Table<T: Copy + Default + PartialEq> {
    Dense(Vec<T>),
    Sparse { len: usize, map: HashMap<usize, T> },
}

#[derive(Serialize, Deserialize)]
struct TableDoc<T> {
    len: usize,
    dense: bool,
    entries: Vec<(usize, T)>,
}

impl<T: Copy + Default + PartialEq> From<Table<T>> for TableDoc<T> {
    fn from(t: Table<T>) -> Self {
        let dense = matches!(t, Table::Dense(_));
        let len = t.len();
        let mut entries: Vec<(usize, T)> = match t {
            Table::Dense(v) => v
                .into_iter()
                .enumerate()
                .filter(|(_, x)| *x != T::default())
                .collect(),
            Table::Sparse { map, .. } => map.into_iter().collect(),
        };
        entries.sort_by_key(|e| e.0);
        TableDoc { len, dense, entries }
    }
}

impl<T: Copy + Default + PartialEq> From<TableDoc<T>> for Table<T> {
    fn from(doc: TableDoc<T>) -> Self {
        if doc.dense {
            let mut v = vec![T::default(); doc.len];
            for (k, x) in doc.entries {
                v[k] = x;
            }
            Table::Dense(v)
        } else {
            Table::Sparse {
                len: doc.len,
                map: doc.entries.into_iter().collect(),
            }
        }
    }
}

impl<T: Copy + Default + PartialEq> Table<T> {
    pub fn len(&self) -> usize {
        match self {
            Table::Dense(v) => v.len(),
            Table::Sparse { len, .. } => *len,
        }
    }
}

impl<T: Copy + Default + PartialEq + AddAssign> Table<T> {
    pub fn zeros(len: usize, dense: bool) -> Self {
        if dense {
            Table::Dense(vec![T::default(); len])
        } else {
            Table::Sparse {
                len,
                map: HashMap::new(),
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> T {
        match self {
            Table::Dense(v) => v[k],
            Table::Sparse { map, .. } => map.get(&k).copied().unwrap_or_default(),
        }
    }

    pub fn add(&mut self, k: usize, x: T) {
        match self {
            Table::Dense(v) => v[k] += x,
            Table::Sparse { map, .. } => *map.entry(k).or_default() += x,
        }
    }

    /// Entries that may be non-zero, in ascending key order.
    pub fn nonzero(&self) -> Vec<(usize, T)> {
        match self {
            Table::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != T::default())
                .map(|(k, x)| (k, *x))
                .collect(),
            Table::Sparse { map, .. } => {
                let sorted: BTreeMap<usize, T> = map.iter().map(|(k, v)| (*k, *v)).collect();
                sorted.into_iter().collect()
            }
        }
    }

    pub fn add_table(&mut self, other: &Table<T>) {
        for (k, x) in other.nonzero() {
            self.add(k, x);
        }
    }

    pub fn clear(&mut self) {
        match self {
            Table::Dense(v) => v.iter_mut().for_each(|x| *x = T::default()),
            Table::Sparse { map, .. } => map.clear(),
        }
    }

    pub fn map_into<U: Copy + Default + PartialEq + AddAssign>(&self, f: impl Fn(T) -> U) -> Table<U> {
        match self {
            Table::Dense(v) => Table::Dense(v.iter().map(|x| f(*x)).collect()),
            Table::Sparse { len, map } => Table::Sparse {
                len: *len,
                map: map.iter().map(|(k, x)| (*k, f(*x))).collect(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Scope family
// ---------------------------------------------------------------------------

/// Union scope of a candidate pair and the projection of its cells onto the first member.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInfo {
    pub union: usize,
    pub to_first: Vec<usize>,
}

/// The tracked scopes, their cell indexers, and the size-m candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeFamily {
    joint: FactorSpace,
    scopes: Vec<Scope>,
    indexers: Vec<ScopeIndexer>,
    ids: HashMap<Scope, usize>,
    m: Option<usize>,
    base: Vec<usize>,
    pairs: HashMap<(usize, usize), PairInfo>,
}

#[derive(Serialize, Deserialize)]
struct FamilyDoc {
    joint_sizes: Vec<usize>,
    m: Option<usize>,
    scopes: Vec<Scope>,
}

impl ScopeFamily {
    /// All scopes of size `m..=2m` plus any `extra` scopes (pins).
    pub fn structure_learning(joint: &FactorSpace, m: usize, extra: &[Scope]) -> Result<Self> {
        let n = joint.num_factors();
        if m == 0 || m > n {
            return domain(format!("scope size m={m} must satisfy 0 < m <= n={n}"));
        }
        let mut scopes = scopes_in_size_range(n, m, 2 * m);
        for z in extra {
            if !scopes.contains(z) {
                scopes.push(z.clone());
            }
        }
        Self::build(joint, scopes, Some(m))
    }

    /// An explicit list of scopes without candidate structure.
    pub fn explicit(joint: &FactorSpace, scopes: Vec<Scope>) -> Result<Self> {
        let mut uniq = Vec::new();
        for z in scopes {
            if !uniq.contains(&z) {
                uniq.push(z);
            }
        }
        Self::build(joint, uniq, None)
    }

    fn build(joint: &FactorSpace, scopes: Vec<Scope>, m: Option<usize>) -> Result<Self> {
        let indexers = scopes
            .iter()
            .map(|z| ScopeIndexer::new(joint, z))
            .collect::<Result<Vec<_>>>()?;
        let ids: HashMap<Scope, usize> = scopes.iter().cloned().enumerate().map(|(k, z)| (z, k)).collect();
        let mut fam = Self {
            joint: joint.clone(),
            scopes,
            indexers,
            ids,
            m,
            base: Vec::new(),
            pairs: HashMap::new(),
        };
        if let Some(m) = m {
            fam.base = enumerate_scopes(joint.num_factors(), m)?
                .iter()
                .map(|z| fam.ids[z])
                .collect();
            for &a in &fam.base {
                for &b in &fam.base {
                    let u = fam.ids[&fam.scopes[a].union(&fam.scopes[b])];
                    let to_first = fam.indexers[u]
                        .projection_map(&fam.indexers[a])
                        .expect("member of union");
                    fam.pairs.insert((a, b), PairInfo { union: u, to_first });
                }
            }
        }
        Ok(fam)
    }

    pub fn joint(&self) -> &FactorSpace {
        &self.joint
    }

    pub fn len(&self) -> usize {
        self.scopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scopes.is_empty()
    }

    pub fn m(&self) -> Option<usize> {
        self.m
    }

    pub fn scope(&self, id: usize) -> &Scope {
        &self.scopes[id]
    }

    pub fn scopes(&self) -> &[Scope] {
        &self.scopes
    }

    pub fn indexer(&self, id: usize) -> &ScopeIndexer {
        &self.indexers[id]
    }

    pub fn id(&self, scope: &Scope) -> Option<usize> {
        self.ids.get(scope).copied()
    }

    /// Ids of the size-m candidate scopes, lexicographic.
    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&PairInfo> {
        self.pairs.get(&(a, b))
    }

    /// Cell map from scope `from` onto its subset `to`.
    pub fn projection(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        self.indexers[from].projection_map(&self.indexers[to])
    }

    pub fn cells(&self, id: usize) -> usize {
        self.indexers[id].cells()
    }

    pub fn total_cells(&self) -> u128 {
        self.indexers.iter().map(|ix| ix.cells() as u128).sum()
    }

    /// `L = max_{|Z| = m} |X[Z]|`, or the largest tracked scope when no m is set.
    pub fn max_candidate_cells(&self) -> usize {
        if self.base.is_empty() {
            self.indexers.iter().map(ScopeIndexer::cells).max().unwrap_or(1)
        } else {
            self.base.iter().map(|&b| self.cells(b)).max().unwrap_or(1)
        }
    }
}

impl Serialize for ScopeFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyDoc {
            joint_sizes: self.joint.sizes().to_vec(),
            m: self.m,
            scopes: self.scopes.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScopeFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = FamilyDoc::deserialize(d)?;
        let joint = FactorSpace::new(doc.joint_sizes).map_err(serde::de::Error::custom)?;
        ScopeFamily::build(&joint, doc.scopes, doc.m).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Confidence parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceParams {
    pub delta: f64,
    pub d: usize,
    pub w: usize,
    pub l: usize,
    /// Multiplier on every radius; 1.0 reproduces the formulas verbatim.
    pub radius_scale: f64,
}

impl ConfidenceParams {
    pub fn new(delta: f64, d: usize, w: usize, l: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return domain(format!("delta={delta} must lie in (0,1)"));
        }
        if d == 0 || w == 0 || l == 0 {
            return domain("d, W and L must be positive");
        }
        Ok(Self {
            delta,
            d,
            w,
            l,
            radius_scale: 1.0,
        })
    }

    /// Parameters for a model learned with the given family.
    pub fn for_family(delta: f64, state_space: &FactorSpace, family: &ScopeFamily) -> Result<Self> {
        Self::new(
            delta,
            state_space.num_factors(),
            family.joint().max_factor_size(),
            family.max_candidate_cells(),
        )
    }

    pub fn with_radius_scale(mut self, scale: f64) -> Self {
        self.radius_scale = scale;
        self
    }

    /// `τ(t) = ln(6 d W L t / δ)`.
    pub fn tau(&self, t: u64) -> f64 {
        (6.0 * self.d as f64 * self.w as f64 * self.l as f64 * t.max(1) as f64 / self.delta).ln()
    }
}

// ---------------------------------------------------------------------------
// Counters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScopeStats {
    n: Table<u64>,
    nu: Table<u64>,
    trans: Vec<Table<u64>>,
    nu_trans: Vec<Table<u64>>,
    reward_sum: Vec<Table<f64>>,
    nu_reward: Vec<Table<f64>>,
}

/// Total and in-episode visit counters for every tracked scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeCounters {
    family: Arc<ScopeFamily>,
    state_sizes: Vec<usize>,
    num_rewards: usize,
    stats: Vec<ScopeStats>,
    t: u64,
    t_k: u64,
}

impl ScopeCounters {
    pub fn new(family: Arc<ScopeFamily>, state_sizes: Vec<usize>, num_rewards: usize) -> Self {
        let stats = (0..family.len())
            .map(|id| {
                let cells = family.cells(id);
                let dense = cells <= DENSE_CELL_LIMIT;
                ScopeStats {
                    n: Table::zeros(cells, dense),
                    nu: Table::zeros(cells, dense),
                    trans: state_sizes.iter().map(|w| Table::zeros(cells * w, dense)).collect(),
                    nu_trans: state_sizes.iter().map(|w| Table::zeros(cells * w, dense)).collect(),
                    reward_sum: (0..num_rewards).map(|_| Table::zeros(cells, dense)).collect(),
                    nu_reward: (0..num_rewards).map(|_| Table::zeros(cells, dense)).collect(),
                }
            })
            .collect();
        Self {
            family,
            state_sizes,
            num_rewards,
            stats,
            t: 1,
            t_k: 1,
        }
    }

    pub fn family(&self) -> &Arc<ScopeFamily> {
        &self.family
    }

    /// Index of the next step (starts at 1).
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn episode_start(&self) -> u64 {
        self.t_k
    }

    /// Cell of `x` in every tracked scope.
    pub fn cells_of(&self, x: &[usize]) -> Vec<usize> {
        (0..self.family.len()).map(|id| self.family.indexer(id).cell(x)).collect()
    }

    pub fn n(&self, id: usize, cell: usize) -> u64 {
        self.stats[id].n.get(cell)
    }

    pub fn nu(&self, id: usize, cell: usize) -> u64 {
        self.stats[id].nu.get(cell)
    }

    pub fn n_trans(&self, id: usize, i: usize, cell: usize, w: usize) -> u64 {
        self.stats[id].trans[i].get(cell * self.state_sizes[i] + w)
    }

    pub fn nu_trans(&self, id: usize, i: usize, cell: usize, w: usize) -> u64 {
        self.stats[id].nu_trans[i].get(cell * self.state_sizes[i] + w)
    }

    /// Reward sum over all recorded steps, in-episode ones included.
    pub fn reward_sum(&self, id: usize, j: usize, cell: usize) -> f64 {
        self.stats[id].reward_sum[j].get(cell) + self.stats[id].nu_reward[j].get(cell)
    }

    /// True iff some tracked scope has `ν_Z(x[Z]) >= max{N_Z(x[Z]), 1}`.
    pub fn doubling_triggered(&self, x: &[usize]) -> bool {
        (0..self.family.len()).any(|id| {
            let c = self.family.indexer(id).cell(x);
            self.nu(id, c) >= self.n(id, c).max(1)
        })
    }

    /// Add one transition to the in-episode counters and reward sums.
    pub fn record(&mut self, x: &[usize], next_state: &[usize], reward_factors: &[f64]) {
        for id in 0..self.family.len() {
            let c = self.family.indexer(id).cell(x);
            let st = &mut self.stats[id];
            st.nu.add(c, 1);
            for (i, w) in next_state.iter().enumerate() {
                st.nu_trans[i].add(c * self.state_sizes[i] + w, 1);
            }
            for (j, &r) in reward_factors.iter().enumerate() {
                st.nu_reward[j].add(c, r);
            }
        }
        self.t += 1;
    }

    pub fn record_transition(&mut self, step: &StepRecord) {
        let joint = self.family.joint().clone();
        let d = self.state_sizes.len();
        let mut x = vec![0; joint.num_factors()];
        let state_space = FactorSpace::new(self.state_sizes.clone()).expect("valid sizes");
        state_space.decode_into(step.state, &mut x[..d]);
        let action_space =
            FactorSpace::new(joint.sizes()[d..].to_vec()).expect("valid sizes");
        action_space.decode_into(step.action, &mut x[d..]);
        let next = state_space.decode(step.next_state);
        self.record(&x, &next, &step.reward_factors);
    }

    /// `N ← N + ν`, `ν ← 0`, `t_k ← t`.
    pub fn roll_episode(&mut self) {
        for st in &mut self.stats {
            st.n.add_table(&st.nu);
            st.nu.clear();
            for (tot, cur) in st.trans.iter_mut().zip(st.nu_trans.iter_mut()) {
                tot.add_table(cur);
                cur.clear();
            }
            for (tot, cur) in st.reward_sum.iter_mut().zip(st.nu_reward.iter_mut()) {
                tot.add_table(cur);
                cur.clear();
            }
        }
        self.t_k = self.t;
    }

    /// `Σ_w N_{i,Z}(v,w) = N_Z(v)` (and the same for ν) everywhere.
    pub fn check_invariants(&self) -> bool {
        for (id, st) in self.stats.iter().enumerate() {
            for c in 0..self.family.cells(id) {
                let n = st.n.get(c);
                let nu = st.nu.get(c);
                for (i, &w) in self.state_sizes.iter().enumerate() {
                    let tot: u64 = (0..w).map(|k| st.trans[i].get(c * w + k)).sum();
                    let cur: u64 = (0..w).map(|k| st.nu_trans[i].get(c * w + k)).sum();
                    if tot != n || cur != nu {
                        return false;
                    }
                }
                for j in 0..self.num_rewards {
                    if st.reward_sum[j].get(c) + st.nu_reward[j].get(c) > (n + nu) as f64 + 1e-9 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Freeze the episode-start statistics.
    pub fn snapshot(&self, params: &ConfidenceParams) -> EmpiricalSnapshot {
        EmpiricalSnapshot {
            family: self.family.clone(),
            state_sizes: self.state_sizes.clone(),
            num_rewards: self.num_rewards,
            tau: params.tau(self.t_k),
            radius_scale: params.radius_scale,
            t_k: self.t_k,
            n: self.stats.iter().map(|s| s.n.map_into(|x| x as f64)).collect(),
            trans: self
                .stats
                .iter()
                .map(|s| s.trans.iter().map(|t| t.map_into(|x| x as f64)).collect())
                .collect(),
            reward_sum: self.stats.iter().map(|s| s.reward_sum.clone()).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

/// Empirical estimates and radii frozen at an episode start.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSnapshot {
    family: Arc<ScopeFamily>,
    state_sizes: Vec<usize>,
    num_rewards: usize,
    tau: f64,
    radius_scale: f64,
    t_k: u64,
    n: Vec<Table<f64>>,
    trans: Vec<Vec<Table<f64>>>,
    reward_sum: Vec<Vec<Table<f64>>>,
}

impl EmpiricalSnapshot {
    /// A snapshot whose estimates equal the true model's, with `virtual_count`
    /// visits per cell. Scopes that do not contain the true scope get the
    /// uniform average of the true rows over the missing factors.
    pub fn from_model(
        model: &Fmdp,
        family: Arc<ScopeFamily>,
        params: &ConfidenceParams,
        virtual_count: f64,
    ) -> Result<Self> {
        if family.joint() != model.joint_space() {
            return Err(FmdpError::Contract("family space differs from model space".into()));
        }
        let joint = model.joint_space();
        let d = model.num_state_factors();
        let sizes = model.state_space().sizes().to_vec();
        let l = model.num_reward_factors();
        let mut n = Vec::new();
        let mut trans = Vec::new();
        let mut rsum = Vec::new();
        for id in 0..family.len() {
            let ix = family.indexer(id);
            let cells = ix.cells();
            let mut acc_t: Vec<Vec<f64>> = sizes.iter().map(|w| vec![0.0; cells * w]).collect();
            let mut acc_r: Vec<Vec<f64>> = vec![vec![0.0; cells]; l];
            let mut hits = vec![0.0; cells];
            for xi in 0..joint.cardinality() {
                let x = joint.decode(xi);
                let c = ix.cell(&x);
                hits[c] += 1.0;
                for i in 0..d {
                    for (w, p) in model.factor_row(i, &x).iter().enumerate() {
                        acc_t[i][c * sizes[i] + w] += p;
                    }
                }
                for (j, acc) in acc_r.iter_mut().enumerate() {
                    acc[c] += model.reward_mean_factor(j, &x);
                }
            }
            n.push(Table::Dense(vec![virtual_count; cells]));
            trans.push(
                acc_t
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        Table::Dense(
                            v.iter()
                                .enumerate()
                                .map(|(k, s)| s / hits[k / sizes[i]] * virtual_count)
                                .collect(),
                        )
                    })
                    .collect(),
            );
            rsum.push(
                acc_r
                    .into_iter()
                    .map(|v| {
                        Table::Dense(v.iter().zip(&hits).map(|(s, h)| s / h * virtual_count).collect())
                    })
                    .collect(),
            );
        }
        Ok(Self {
            family,
            state_sizes: sizes,
            num_rewards: l,
            tau: params.tau(1),
            radius_scale: params.radius_scale,
            t_k: 1,
            n,
            trans,
            reward_sum: rsum,
        })
    }

    pub fn family(&self) -> &Arc<ScopeFamily> {
        &self.family
    }

    pub fn state_sizes(&self) -> &[usize] {
        &self.state_sizes
    }

    pub fn num_rewards(&self) -> usize {
        self.num_rewards
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn episode_start(&self) -> u64 {
        self.t_k
    }

    pub fn radius_scale(&self) -> f64 {
        self.radius_scale
    }

    pub fn count(&self, id: usize, cell: usize) -> f64 {
        self.n[id].get(cell)
    }

    pub fn trans_count(&self, id: usize, i: usize, cell: usize, w: usize) -> f64 {
        self.trans[id][i].get(cell * self.state_sizes[i] + w)
    }

    /// `P̄_{i,Z}(w|v) = N_{i,Z}(v,w) / max{N_Z(v),1}`.
    pub fn p_bar(&self, id: usize, i: usize, cell: usize, w: usize) -> f64 {
        self.trans_count(id, i, cell, w) / self.count(id, cell).max(1.0)
    }

    pub fn eps_trans(&self, id: usize, i: usize, cell: usize, w: usize) -> f64 {
        let n = self.count(id, cell).max(1.0);
        let p = self.p_bar(id, i, cell, w);
        self.radius_scale * ((18.0 * p * self.tau / n).sqrt() + 18.0 * self.tau / n)
    }

    pub fn w_trans(&self, id: usize, i: usize, cell: usize, w: usize) -> f64 {
        self.eps_trans(id, i, cell, w).min(self.p_bar(id, i, cell, w))
    }

    /// `ε_Z(v) = sqrt(18 τ / max{N_Z(v),1})`.
    pub fn eps_reward(&self, id: usize, cell: usize) -> f64 {
        self.radius_scale * (18.0 * self.tau / self.count(id, cell).max(1.0)).sqrt()
    }

    pub fn r_bar(&self, id: usize, j: usize, cell: usize) -> f64 {
        self.reward_sum[id][j].get(cell) / self.count(id, cell).max(1.0)
    }

    /// One CSV row per (scope, cell, factor): `scope,cell,factor,N,pbar...,eps...`.
    pub fn export_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "scope,cell,factor,n,p_bar,eps")?;
        for id in 0..self.family.len() {
            let z = self.family.scope(id).indices().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
            for cell in 0..self.family.cells(id) {
                let n = self.count(id, cell);
                if n == 0.0 {
                    continue;
                }
                for (i, &w) in self.state_sizes.iter().enumerate() {
                    let p: Vec<String> = (0..w).map(|k| format!("{}", self.p_bar(id, i, cell, k))).collect();
                    let e: Vec<String> = (0..w).map(|k| format!("{}", self.eps_trans(id, i, cell, k))).collect();
                    writeln!(out, "{z},{cell},{i},{n},{},{}", p.join(" "), e.join(" "))?;
                }
            }
        }
        Ok(())
    }
}
