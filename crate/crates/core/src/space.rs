//! Factored sets, scopes and mixed-radix cell indexing.
//!
//! Tuples are encoded with factor 0 as the least significant digit, so a
//! joint state-action index is `state + |S| * action` when the state factors
//! come first.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{domain, FmdpError, Result};

/// Largest cardinality a factor space may have.
pub const MAX_CARDINALITY: u128 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FactorSpace {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl TryFrom<Vec<usize>> for FactorSpace {
    type Error = FmdpError;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        FactorSpace::new(sizes)
    }
}

impl From<FactorSpace> for Vec<usize> {
    fn from(space: FactorSpace) -> Self {
        space.sizes
    }
}

impl FactorSpace {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return domain(format!("factor {pos} has size 0"));
        }
        let mut strides = Vec::with_capacity(sizes.len());
        let mut total: u128 = 1;
        for &s in &sizes {
            strides.push(total as usize);
            total *= s as u128;
            if total > MAX_CARDINALITY {
                return Err(FmdpError::Size {
                    what: "factor space cardinality".into(),
                    needed: total,
                    cap: MAX_CARDINALITY,
                });
            }
        }
        Ok(Self {
            sizes,
            strides,
            total: total as usize,
        })
    }

    /// A non-factored space: one factor holding every element.
    pub fn flat(size: usize) -> Result<Self> {
        Self::new(vec![size])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_factors(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, factor: usize) -> usize {
        self.sizes[factor]
    }

    pub fn stride(&self, factor: usize) -> usize {
        self.strides[factor]
    }

    pub fn cardinality(&self) -> usize {
        self.total
    }

    pub fn max_factor_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(1)
    }

    pub fn encode(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.sizes.len() {
            return domain(format!(
                "tuple has {} values, space has {} factors",
                tuple.len(),
                self.sizes.len()
            ));
        }
        let mut index = 0;
        for (k, (&v, &s)) in tuple.iter().zip(&self.sizes).enumerate() {
            if v >= s {
                return domain(format!("value {v} out of range for factor {k} of size {s}"));
            }
            index += v * self.strides[k];
        }
        Ok(index)
    }

    /// Encode without range checks; callers guarantee validity.
    pub fn encode_unchecked(&self, tuple: &[usize]) -> usize {
        tuple.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        self.decode_into(index, &mut out);
        out
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for (slot, &s) in out.iter_mut().zip(&self.sizes) {
            *slot = index % s;
            index /= s;
        }
    }

    /// The concatenation `self × other` (self's factors first).
    pub fn product(&self, other: &FactorSpace) -> Result<FactorSpace> {
        let mut sizes = self.sizes.clone();
        sizes.extend_from_slice(&other.sizes);
        FactorSpace::new(sizes)
    }

    /// Number of cells of `X[Z]`.
    pub fn scope_cardinality(&self, scope: &Scope) -> usize {
        scope.iter().map(|i| self.sizes[i]).product()
    }
}

/// A canonical (sorted, duplicate-free) set of factor indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Scope(Vec<usize>);

impl From<Vec<usize>> for Scope {
    fn from(v: Vec<usize>) -> Self {
        Scope::new(v)
    }
}

impl From<Scope> for Vec<usize> {
    fn from(s: Scope) -> Self {
        s.0
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

impl Scope {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Scope(indices)
    }

    pub fn empty() -> Self {
        Scope(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, factor: usize) -> bool {
        self.0.binary_search(&factor).is_ok()
    }

    pub fn is_subset(&self, other: &Scope) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    pub fn union(&self, other: &Scope) -> Scope {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Scope::new(v)
    }

    /// Positions of this scope's members inside `outer`, which must contain it.
    pub fn positions_in(&self, outer: &Scope) -> Option<Vec<usize>> {
        self.0
            .iter()
            .map(|i| outer.0.binary_search(i).ok())
            .collect()
    }

    pub fn check(&self, num_factors: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= num_factors => domain(format!(
                "scope {self} refers to factor {max} but only {num_factors} exist"
            )),
            _ => Ok(()),
        }
    }
}

/// Sub-tuple of `x` at the scope's indices, in scope order.
pub fn project(x: &[usize], scope: &Scope) -> Vec<usize> {
    scope.iter().map(|i| x[i]).collect()
}

/// Mixed-radix indexing of the cells `X[Z]` of one scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeIndexer {
    scope: Scope,
    radices: Vec<usize>,
    cells: usize,
}

impl ScopeIndexer {
    pub fn new(space: &FactorSpace, scope: &Scope) -> Result<Self> {
        scope.check(space.num_factors())?;
        let radices: Vec<usize> = scope.iter().map(|i| space.size(i)).collect();
        let cells = radices.iter().product();
        Ok(Self {
            scope: scope.clone(),
            radices,
            cells,
        })
    }

    pub fn scope(&self) -> &Scope {
        &self.scope
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Cell index of a full tuple `x` over the space.
    pub fn cell(&self, x: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (f, &r) in self.scope.0.iter().zip(&self.radices) {
            idx += x[*f] * stride;
            stride *= r;
        }
        idx
    }

    /// Cell index of a tuple already restricted to the scope.
    pub fn cell_of_values(&self, values: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (v, &r) in values.iter().zip(&self.radices) {
            idx += v * stride;
            stride *= r;
        }
        idx
    }

    pub fn values(&self, mut cell: usize) -> Vec<usize> {
        self.radices
            .iter()
            .map(|&r| {
                let v = cell % r;
                cell /= r;
                v
            })
            .collect()
    }

    /// For every cell of this scope, the cell of `sub` (a subset) it projects to.
    pub fn projection_map(&self, sub: &ScopeIndexer) -> Option<Vec<usize>> {
        let pos = sub.scope.positions_in(&self.scope)?;
        Some(
            (0..self.cells)
                .map(|c| {
                    let vals = self.values(c);
                    let sub_vals: Vec<usize> = pos.iter().map(|&p| vals[p]).collect();
                    sub.cell_of_values(&sub_vals)
                })
                .collect(),
        )
    }
}

/// All `C(n, m)` scopes of size exactly `m`, in lexicographic order.
pub fn enumerate_scopes(n: usize, m: usize) -> Result<Vec<Scope>> {
    if m == 0 || m > n {
        return domain(format!("scope size m={m} must satisfy 0 < m <= n={n}"));
    }
    Ok((0..n).combinations(m).map(Scope).collect())
}

/// Every scope with size in `[lo, hi]` (clamped to n), ordered by size then lexicographically.
pub fn scopes_in_size_range(n: usize, lo: usize, hi: usize) -> Vec<Scope> {
    (lo..=hi.min(n))
        .flat_map(|k| (0..n).combinations(k).map(Scope))
        .collect()
}

/// Distinct unions `Z ∪ Z'` of pairs of size-m scopes.
pub fn union_family(n: usize, m: usize) -> Result<Vec<Scope>> {
    let base = enumerate_scopes(n, m)?;
    let mut out: Vec<Scope> = base
        .iter()
        .flat_map(|a| base.iter().map(move |b| a.union(b)))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.dedup();
    Ok(out)
}
