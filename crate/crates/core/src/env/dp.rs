//! Exact finite-horizon dynamic programming on scalarized rewards.

use serde::{Deserialize, Serialize};

use super::mdp::{CmoMdpSpec, TimedPolicy};
use crate::domain::PreferenceVector;
use crate::{Error, Result};

/// Greedy oracle for one preference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSolution {
    pub policy: TimedPolicy,
    /// Discounted vector Q of the greedy policy, `q[((t * S + s) * A + a) * D + i]`.
    pub q: Vec<f64>,
    /// Discounted vector value at the initial state.
    pub value: Vec<f64>,
    /// Undiscounted expected reward / cost return from the initial state.
    pub expected_return: Vec<f64>,
    pub expected_cost: Vec<f64>,
    n_states: usize,
    n_actions: usize,
    dim: usize,
}

impl OracleSolution {
    pub fn q(&self, t: usize, s: usize, a: usize) -> &[f64] {
        let base = ((t * self.n_states + s) * self.n_actions + a) * self.dim;
        &self.q[base..base + self.dim]
    }
}

pub(crate) type Successors = Vec<Vec<(usize, f64)>>;

pub(crate) fn successors(mdp: &CmoMdpSpec) -> Successors {
    (0..mdp.n_states * mdp.n_actions)
        .map(|sa| {
            let (s, a) = (sa / mdp.n_actions, sa % mdp.n_actions);
            mdp.p(s, a)
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(s2, p)| (s2, *p))
                .collect()
        })
        .collect()
}

/// Index of the maximum, ties broken toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + best.abs());
    values.iter().position(|v| *v >= best - tol).unwrap_or(0)
}

/// Backward induction on `w·r` over the full horizon; returns the greedy
/// time-indexed policy with its vector-valued Q.
pub fn scalarized_value_iteration(mdp: &CmoMdpSpec, w: &PreferenceVector) -> Result<OracleSolution> {
    scalarized_value_iteration_weights(mdp, w.as_slice())
}

/// As [`scalarized_value_iteration`] for arbitrary nonnegative weights.
pub fn scalarized_value_iteration_weights(mdp: &CmoMdpSpec, w: &[f64]) -> Result<OracleSolution> {
    if w.len() != mdp.n_rewards {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_rewards,
            got: w.len(),
        });
    }
    let (ns, na, d, h) = (mdp.n_states, mdp.n_actions, mdp.n_rewards, mdp.horizon);
    let succ = successors(mdp);
    let gamma = mdp.gamma;

    let mut actions = vec![0usize; h * ns];
    let mut q = vec![0.0; h * ns * na * d];
    // scalar and vector values at t + 1
    let mut v_next = vec![0.0; ns];
    let mut vv_next = vec![0.0; ns * d];
    let mut qs = vec![0.0; na];
    for t in (0..h).rev() {
        let mut v_cur = vec![0.0; ns];
        let mut vv_cur = vec![0.0; ns * d];
        for s in 0..ns {
            for a in 0..na {
                let r = mdp.r(s, a);
                let mut scalar: f64 = w.iter().zip(r).map(|(x, y)| x * y).sum();
                let qbase = ((t * ns + s) * na + a) * d;
                q[qbase..qbase + d].copy_from_slice(r);
                for &(s2, p) in &succ[s * na + a] {
                    scalar += gamma * p * v_next[s2];
                    for i in 0..d {
                        q[qbase + i] += gamma * p * vv_next[s2 * d + i];
                    }
                }
                qs[a] = scalar;
            }
            let best = argmax_lowest(&qs);
            actions[t * ns + s] = best;
            v_cur[s] = qs[best];
            let qbase = ((t * ns + s) * na + best) * d;
            vv_cur[s * d..(s + 1) * d].copy_from_slice(&q[qbase..qbase + d]);
        }
        v_next = v_cur;
        vv_next = vv_cur;
    }
    let policy = TimedPolicy {
        n_states: ns,
        horizon: h,
        actions,
    };
    let (expected_return, expected_cost) = evaluate_timed(mdp, &policy, 1.0);
    let s0 = mdp.initial_state;
    Ok(OracleSolution {
        value: vv_next[s0 * d..(s0 + 1) * d].to_vec(),
        policy,
        q,
        expected_return,
        expected_cost,
        n_states: ns,
        n_actions: na,
        dim: d,
    })
}

/// Exact expected (reward, cost) return of a deterministic time-indexed policy
/// from the initial state under the given discount.
pub fn evaluate_timed(mdp: &CmoMdpSpec, policy: &TimedPolicy, discount: f64) -> (Vec<f64>, Vec<f64>) {
    let (ns, d, k) = (mdp.n_states, mdp.n_rewards, mdp.n_costs);
    let succ = successors(mdp);
    let mut vr = vec![0.0; ns * d];
    let mut vc = vec![0.0; ns * k];
    for t in (0..mdp.horizon).rev() {
        let mut nr = vec![0.0; ns * d];
        let mut nc = vec![0.0; ns * k];
        for s in 0..ns {
            let a = policy.action(t, s);
            nr[s * d..(s + 1) * d].copy_from_slice(mdp.r(s, a));
            nc[s * k..(s + 1) * k].copy_from_slice(mdp.c(s, a));
            for &(s2, p) in &succ[s * mdp.n_actions + a] {
                for i in 0..d {
                    nr[s * d + i] += discount * p * vr[s2 * d + i];
                }
                for j in 0..k {
                    nc[s * k + j] += discount * p * vc[s2 * k + j];
                }
            }
        }
        vr = nr;
        vc = nc;
    }
    let s0 = mdp.initial_state;
    (vr[s0 * d..(s0 + 1) * d].to_vec(), vc[s0 * k..(s0 + 1) * k].to_vec())
}
