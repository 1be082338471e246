//! Optimistic models built from an episode-start snapshot: the implicit
//! extended-action view, the explicit stretched factored model, and the
//! constructions for non-factored action spaces.

pub mod hat;
pub mod nfa;
pub mod tilde;

use crate::estimator::EmpiricalSnapshot;

pub use hat::HatModel;
pub use nfa::{build_m_prime, build_nfa_optimistic, NfaModel};
pub use tilde::{FullEnumeration, TildeOptions, TildeView};

/// Optimistic row for factor `i` under scope `z` at `cell`, with all
/// uncertainty moved to `dir`: `P̄ − 𝒲`, plus `Σ 𝒲` at `dir`.
/// An unvisited cell yields the point mass at `dir`.
pub fn optimistic_factor_row(snap: &EmpiricalSnapshot, i: usize, z: usize, cell: usize, dir: usize) -> Vec<f64> {
    let w_i = snap.state_sizes()[i];
    let mut q = vec![0.0; w_i];
    if snap.count(z, cell) == 0.0 {
        q[dir] = 1.0;
        return q;
    }
    let mut moved = 0.0;
    for (w, slot) in q.iter_mut().enumerate() {
        let p = snap.p_bar(z, i, cell, w);
        let m = snap.w_trans(z, i, cell, w);
        *slot = p - m;
        moved += m;
    }
    q[dir] += moved;
    q
}

/// `min{1, r̄ + ε}` for reward factor `j` under scope `z` at `cell`.
pub fn optimistic_reward(snap: &EmpiricalSnapshot, j: usize, z: usize, cell: usize) -> f64 {
    (snap.r_bar(z, j, cell) + snap.eps_reward(z, cell)).min(1.0)
}
