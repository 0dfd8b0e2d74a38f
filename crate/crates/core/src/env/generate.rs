//! Offline dataset generation from noisy oracle behavior policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dp::scalarized_value_iteration_weights;
use super::mdp::{CmoMdpSpec, EpsilonGreedy};
use super::rollout::simulate_episode;
use crate::domain::{OfflineDataset, PreferenceVector, Trajectory};
use crate::{Error, Result};

pub const AMATEUR_EPSILON: f64 = 0.35;
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [0.0, 0.1, 0.2, 0.5, 1.0];
/// Attempts per requested episode before giving up on a behavior policy.
pub const MAX_ATTEMPTS_PER_EPISODE: usize = 100;

/// The behavior policies a dataset is collected from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorPolicySet {
    pub preferences: Vec<PreferenceVector>,
    pub epsilon: f64,
    /// Cost multipliers; when nonempty and the MDP has costs, every preference is
    /// paired with every multiplier.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
}

impl BehaviorPolicySet {
    /// Two-objective preferences `[w, 1 − w]` for `w = 0.5, 0.6, …, 1.0`.
    pub fn default_preferences() -> Vec<PreferenceVector> {
        (5..=10)
            .map(|i| {
                let w = i as f64 / 10.0;
                PreferenceVector::new(vec![w, 1.0 - w]).expect("on simplex")
            })
            .collect()
    }

    pub fn expert() -> Self {
        BehaviorPolicySet {
            preferences: Self::default_preferences(),
            epsilon: 0.0,
            lambda_grid: Vec::new(),
        }
    }

    pub fn amateur() -> Self {
        BehaviorPolicySet {
            epsilon: AMATEUR_EPSILON,
            ..Self::expert()
        }
    }

    pub fn with_lambda_grid(mut self, grid: &[f64]) -> Self {
        self.lambda_grid = grid.to_vec();
        self
    }

    pub fn validate(&self, mdp: &CmoMdpSpec) -> Result<()> {
        if self.preferences.is_empty() {
            return Err(Error::Empty("behavior preferences"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} not in [0, 1]", self.epsilon)));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::invalid("multipliers must be finite and nonnegative"));
        }
        for p in &self.preferences {
            if p.dim() != mdp.n_rewards {
                return Err(Error::DimensionMismatch {
                    expected: mdp.n_rewards,
                    got: p.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Rolls out the epsilon-greedy oracle of every behavior preference (and
/// multiplier) and returns the labeled dataset.
///
/// Episodes that collect no reward carry no preference signal and are redrawn,
/// up to [`MAX_ATTEMPTS_PER_EPISODE`] times the requested count.
pub fn generate_dataset(
    env_id: &str,
    mdp: &CmoMdpSpec,
    behaviors: &BehaviorPolicySet,
    episodes_per_pref: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    mdp.validate()?;
    behaviors.validate(mdp)?;
    if episodes_per_pref == 0 {
        return Err(Error::invalid("episodes_per_pref must be >= 1"));
    }
    let constrained = mdp.n_costs > 0 && !behaviors.lambda_grid.is_empty();
    let aug = mdp.augmented();
    let lambdas: &[f64] = if constrained { &behaviors.lambda_grid } else { &[0.0] };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trajectories = Vec::new();
    for pref in &behaviors.preferences {
        for &lambda in lambdas {
            let mut weights = pref.as_slice().to_vec();
            weights.extend(std::iter::repeat_n(lambda, mdp.n_costs));
            let policy = scalarized_value_iteration_weights(&aug, &weights)?.policy;
            let noisy = EpsilonGreedy {
                inner: &policy,
                epsilon: behaviors.epsilon,
            };
            let mut kept = 0;
            for _ in 0..episodes_per_pref * MAX_ATTEMPTS_PER_EPISODE {
                if kept == episodes_per_pref {
                    break;
                }
                let ts = simulate_episode(mdp, &noisy, &mut rng);
                let mut traj = Trajectory::new(ts);
                if traj.return_vector().iter().all(|r| *r <= 0.0) {
                    continue;
                }
                traj.src = Some(pref.clone());
                trajectories.push(traj);
                kept += 1;
            }
        }
    }
    if trajectories.is_empty() {
        return Err(Error::Empty("generated trajectories"));
    }
    let mut ds = OfflineDataset::new(env_id, mdp.n_rewards, mdp.n_costs, trajectories)?;
    ds.label()?;
    Ok(ds)
}
