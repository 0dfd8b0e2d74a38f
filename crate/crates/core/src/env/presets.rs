//! Built-in environments.

use super::mdp::CmoMdpSpec;
use crate::{Error, Result};

pub const CMO_GRID: &str = "cmo-grid";

const SIDE: usize = 8;
const N_ACTIONS: usize = 5;
const GOAL_SCALE: f64 = 10.0;
const HAZARDS: [(usize, usize); 6] = [(0, 6), (1, 5), (2, 4), (0, 7), (1, 6), (2, 5)];

/// Identifiers accepted by [`env_from_id`].
pub fn preset_ids() -> &'static [&'static str] {
    &[CMO_GRID]
}

pub fn env_from_id(id: &str) -> Result<CmoMdpSpec> {
    match id {
        CMO_GRID => Ok(cmo_grid()),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

/// Reward paid on reaching the goal on row `row` of the anti-diagonal.
pub fn cmo_grid_goal_reward(row: usize) -> [f64; 2] {
    let theta = row as f64 * std::f64::consts::FRAC_PI_4 / (SIDE - 1) as f64;
    [GOAL_SCALE * theta.cos(), GOAL_SCALE * theta.sin()]
}

/// 8×8 gridworld with two reward objectives and one hazard cost.
///
/// The agent starts in the top-left corner; actions are up, down, left,
/// right and stay (moves off the grid leave it in place). Every cell on the
/// anti-diagonal `row + col = 7` is a terminal goal paying
/// `10·(cos θ, sin θ)` on arrival, with θ sweeping 0..π/4 from the top-right
/// goal to the bottom-left one, so all goals are seven steps away and their
/// rewards lie on a concave front. Entering a hazard cell costs 1; the three
/// goals with the largest first-objective reward can only be reached through
/// a hazard and are themselves hazardous.
pub fn cmo_grid() -> CmoMdpSpec {
    let n = SIDE * SIDE;
    let id = |r: usize, c: usize| r * SIDE + c;
    let is_goal = |r: usize, c: usize| r + c == SIDE - 1;
    let mut transition = vec![0.0; n * N_ACTIONS * n];
    let mut reward = vec![0.0; n * N_ACTIONS * 2];
    let mut cost = vec![0.0; n * N_ACTIONS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let s = id(r, c);
            for a in 0..N_ACTIONS {
                let sa = s * N_ACTIONS + a;
                if is_goal(r, c) {
                    transition[sa * n + s] = 1.0;
                    continue;
                }
                let (r2, c2) = match a {
                    0 => (r.saturating_sub(1), c),
                    1 => ((r + 1).min(SIDE - 1), c),
                    2 => (r, c.saturating_sub(1)),
                    3 => (r, (c + 1).min(SIDE - 1)),
                    _ => (r, c),
                };
                let s2 = id(r2, c2);
                transition[sa * n + s2] = 1.0;
                if is_goal(r2, c2) {
                    reward[sa * 2..sa * 2 + 2].copy_from_slice(&cmo_grid_goal_reward(r2));
                }
                if s2 != s && HAZARDS.contains(&(r2, c2)) {
                    cost[sa] = 1.0;
                }
            }
        }
    }
    CmoMdpSpec {
        n_states: n,
        n_actions: N_ACTIONS,
        n_rewards: 2,
        n_costs: 1,
        transition,
        reward,
        cost,
        gamma: 0.99,
        horizon: 32,
        initial_state: 0,
        terminal: (0..SIDE).map(|r| id(r, SIDE - 1 - r)).collect(),
    }
}
