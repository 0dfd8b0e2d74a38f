#![allow(dead_code)]

use pdoa::env::{evaluate_timed, CmoMdpSpec, TimedPolicy};

/// Four-state constrained MDP with one reward-rich but costly branch.
///
/// From state 0: action 0 goes to a safe state 1, action 1 to a risky state 2
/// with probability 0.8 (else 1). State 2 pays more reward but entering the
/// sink 3 from it costs. State 3 loops with small reward.
pub fn four_state() -> CmoMdpSpec {
    let (s, a) = (4, 2);
    let mut transition = vec![0.0; s * a * s];
    let mut reward = vec![0.0; s * a * 2];
    let mut cost = vec![0.0; s * a];
    let mut set = |st: usize, ac: usize, p: &[f64], r: [f64; 2], c: f64| {
        let sa = st * a + ac;
        transition[sa * s..sa * s + s].copy_from_slice(p);
        reward[sa * 2..sa * 2 + 2].copy_from_slice(&r);
        cost[sa] = c;
    };
    set(0, 0, &[0.0, 1.0, 0.0, 0.0], [0.2, 0.3], 0.0);
    set(0, 1, &[0.0, 0.2, 0.8, 0.0], [0.5, 0.0], 0.3);
    set(1, 0, &[0.0, 1.0, 0.0, 0.0], [0.3, 0.4], 0.0);
    set(1, 1, &[0.0, 0.0, 0.5, 0.5], [0.6, 0.1], 0.4);
    set(2, 0, &[0.0, 0.0, 1.0, 0.0], [1.0, 0.2], 0.5);
    set(2, 1, &[0.0, 0.0, 0.0, 1.0], [0.4, 0.6], 1.0);
    set(3, 0, &[0.0, 0.0, 0.0, 1.0], [0.1, 0.1], 0.0);
    set(3, 1, &[0.0, 0.0, 1.0, 0.0], [0.0, 0.5], 0.2);
    CmoMdpSpec {
        n_states: s,
        n_actions: a,
        n_rewards: 2,
        n_costs: 1,
        transition,
        reward,
        cost,
        gamma: 0.9,
        horizon: 3,
        initial_state: 0,
        terminal: vec![],
    }
}

/// Best `w·R` over every deterministic time-indexed policy whose expected cost
/// is within `beta`, by exhaustive enumeration.
pub fn exhaustive_constrained_optimum(mdp: &CmoMdpSpec, w: &[f64], beta: &[f64]) -> Option<f64> {
    let slots = mdp.n_states * mdp.horizon;
    let total = mdp.n_actions.pow(slots as u32);
    let mut best: Option<f64> = None;
    for code in 0..total {
        let mut c = code;
        let actions = (0..slots)
            .map(|_| {
                let a = c % mdp.n_actions;
                c /= mdp.n_actions;
                a
            })
            .collect();
        let policy = TimedPolicy {
            n_states: mdp.n_states,
            horizon: mdp.horizon,
            actions,
        };
        let (ret, cost) = evaluate_timed(mdp, &policy, 1.0);
        if cost.iter().zip(beta).all(|(c, b)| *c <= *b + 1e-9) {
            let u: f64 = w.iter().zip(&ret).map(|(x, y)| x * y).sum();
            if best.is_none_or(|b| u > b) {
                best = Some(u);
            }
        }
    }
    best
}

/// `(utility, cost)` of every deterministic time-indexed policy.
pub fn enumerate_policies(mdp: &CmoMdpSpec, w: &[f64]) -> Vec<(f64, f64)> {
    let slots = mdp.n_states * mdp.horizon;
    let total = mdp.n_actions.pow(slots as u32);
    let mut out: Vec<(f64, f64)> = (0..total)
        .map(|code| {
            let mut c = code;
            let actions = (0..slots)
                .map(|_| {
                    let a = c % mdp.n_actions;
                    c /= mdp.n_actions;
                    a
                })
                .collect();
            let policy = TimedPolicy {
                n_states: mdp.n_states,
                horizon: mdp.horizon,
                actions,
            };
            let (ret, cost) = evaluate_timed(mdp, &policy, 1.0);
            (w.iter().zip(&ret).map(|(x, y)| x * y).sum(), cost[0])
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    out
}

/// Constrained optimum over episode-level mixtures of deterministic policies
/// (single cost), scanning every pair of enumerated policies.
pub fn exhaustive_mixture_optimum(mdp: &CmoMdpSpec, w: &[f64], beta: f64) -> Option<f64> {
    let pts = enumerate_policies(mdp, w);
    let mut best: Option<f64> = None;
    for &(u1, c1) in &pts {
        for &(u2, c2) in &pts {
            let u = if c1 <= beta + 1e-9 && c2 <= beta + 1e-9 {
                u1.max(u2)
            } else if c1 <= beta + 1e-9 {
                // largest weight on the second policy keeping the mix safe
                let q = (beta - c1) / (c2 - c1);
                (1.0 - q) * u1 + q * u2
            } else {
                continue;
            };
            if best.is_none_or(|b| u > b) {
                best = Some(u);
            }
        }
    }
    best
}
