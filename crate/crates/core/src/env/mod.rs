//! Tabular CMO-MDPs, exact oracles, rollouts and offline data generation.

mod dp;
mod generate;
mod lagrangian;
mod mdp;
mod presets;
mod rollout;

pub use dp::{argmax_lowest, evaluate_timed, scalarized_value_iteration, scalarized_value_iteration_weights, OracleSolution};
pub use generate::{
    generate_dataset, BehaviorPolicySet, AMATEUR_EPSILON, DEFAULT_LAMBDA_GRID, MAX_ATTEMPTS_PER_EPISODE,
};
pub use lagrangian::{
    augmented_preference_search, best_safe_mixture, lagrangian_safe_mixture, lagrangian_safe_policy, simplex_grid,
    SafeMixture, SafePolicy,
};
pub use mdp::{CmoMdpSpec, EpsilonGreedy, Policy, StepContext, TimedPolicy};
pub use presets::{cmo_grid, cmo_grid_goal_reward, env_from_id, preset_ids, CMO_GRID};
pub use rollout::{mean_returns, rollout, sample_index, simulate_episode, EpisodeReturn};
