//! Checks against the known true model.

use crate::estimator::EmpiricalSnapshot;
use crate::model::Fmdp;
use crate::tabular::TabularMdp;

/// Whether every visited cell of every tracked scope that contains a true
/// scope has its estimates within their radii of the truth.
pub fn concentration_holds(snap: &EmpiricalSnapshot, truth: &Fmdp) -> bool {
    let family = snap.family();
    let trans_scopes = truth.transition_scopes();
    let reward_scopes = truth.reward_scopes();
    let mut x = vec![0; family.joint().num_factors()];
    for id in 0..family.len() {
        let scope = family.scope(id);
        let ix = family.indexer(id);
        let trans: Vec<usize> = (0..trans_scopes.len()).filter(|&i| trans_scopes[i].is_subset(scope)).collect();
        let rewards: Vec<usize> = (0..reward_scopes.len()).filter(|&j| reward_scopes[j].is_subset(scope)).collect();
        if trans.is_empty() && rewards.is_empty() {
            continue;
        }
        for cell in 0..ix.cells() {
            if snap.count(id, cell) == 0.0 {
                continue;
            }
            for (f, v) in scope.iter().zip(ix.values(cell)) {
                x[f] = v;
            }
            for &i in &trans {
                for (w, &p) in truth.factor_row(i, &x).iter().enumerate() {
                    if (snap.p_bar(id, i, cell, w) - p).abs() > snap.eps_trans(id, i, cell, w) {
                        return false;
                    }
                }
            }
            for &j in &rewards {
                if (snap.r_bar(id, j, cell) - truth.reward_mean_factor(j, &x)).abs() > snap.eps_reward(id, cell) {
                    return false;
                }
            }
        }
    }
    true
}

/// Flat counterpart: `‖p̂ − p‖₁ ≤ rad_p` and `|r̂ − r| ≤ rad_r` on every visited pair.
pub fn flat_concentration_holds(
    truth: &TabularMdp,
    counts: &[u64],
    p_hat: impl Fn(usize, usize, usize) -> f64,
    r_hat: impl Fn(usize, usize) -> f64,
    radius: impl Fn(usize, usize) -> (f64, f64),
) -> bool {
    let na = truth.num_actions();
    for s in 0..truth.num_states() {
        for a in 0..na {
            if counts[s * na + a] == 0 {
                continue;
            }
            let (rp, rr) = radius(s, a);
            let l1: f64 = truth.row(s, a).iter().enumerate().map(|(s2, &p)| (p_hat(s, a, s2) - p).abs()).sum();
            if l1 > rp || (r_hat(s, a) - truth.reward(s, a)).abs() > rr {
                return false;
            }
        }
    }
    true
}
