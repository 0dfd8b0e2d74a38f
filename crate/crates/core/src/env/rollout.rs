//! Episodic simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mdp::{CmoMdpSpec, Policy, StepContext};
use crate::domain::{CostVector, RewardVector, Transition};

/// Undiscounted returns of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturn {
    pub return_vector: RewardVector,
    pub cost_return: CostVector,
}

/// Index drawn from a discrete distribution by inverse CDF.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Runs one episode from the initial state until the horizon or a terminal state.
pub fn simulate_episode<P: Policy + ?Sized, R: Rng + ?Sized>(
    mdp: &CmoMdpSpec,
    policy: &P,
    rng: &mut R,
) -> Vec<Transition> {
    let mut probs = vec![0.0; mdp.n_actions];
    let mut so_far = vec![0.0; mdp.n_rewards];
    let mut cost_so_far = vec![0.0; mdp.n_costs];
    let mut s = mdp.initial_state;
    let mut out = Vec::with_capacity(mdp.horizon);
    for t in 0..mdp.horizon {
        if mdp.is_terminal(s) {
            break;
        }
        policy.action_probs(
            &StepContext {
                t,
                state: s,
                reward_so_far: &so_far,
                cost_so_far: &cost_so_far,
            },
            &mut probs,
        );
        let a = sample_index(&probs, rng);
        let s2 = sample_index(mdp.p(s, a), rng);
        let r = mdp.r(s, a).to_vec();
        let c = mdp.c(s, a).to_vec();
        for (acc, x) in so_far.iter_mut().zip(&r) {
            *acc += x;
        }
        for (acc, x) in cost_so_far.iter_mut().zip(&c) {
            *acc += x;
        }
        out.push(Transition { s, a, s2, r, c });
        s = s2;
    }
    out
}

/// Simulates `episodes` episodes and reports their undiscounted returns.
pub fn rollout<P: Policy + ?Sized>(
    mdp: &CmoMdpSpec,
    policy: &P,
    episodes: usize,
    seed: u64,
) -> Vec<EpisodeReturn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..episodes)
        .map(|_| {
            let mut ret = EpisodeReturn {
                return_vector: vec![0.0; mdp.n_rewards],
                cost_return: vec![0.0; mdp.n_costs],
            };
            for t in simulate_episode(mdp, policy, &mut rng) {
                for (acc, x) in ret.return_vector.iter_mut().zip(&t.r) {
                    *acc += x;
                }
                for (acc, x) in ret.cost_return.iter_mut().zip(&t.c) {
                    *acc += x;
                }
            }
            ret
        })
        .collect()
}

/// Componentwise mean of episode returns.
pub fn mean_returns(eps: &[EpisodeReturn]) -> EpisodeReturn {
    let n = eps.len().max(1) as f64;
    let mut out = EpisodeReturn {
        return_vector: vec![0.0; eps.first().map_or(0, |e| e.return_vector.len())],
        cost_return: vec![0.0; eps.first().map_or(0, |e| e.cost_return.len())],
    };
    for e in eps {
        for (acc, x) in out.return_vector.iter_mut().zip(&e.return_vector) {
            *acc += x / n;
        }
        for (acc, x) in out.cost_return.iter_mut().zip(&e.cost_return) {
            *acc += x / n;
        }
    }
    out
}
