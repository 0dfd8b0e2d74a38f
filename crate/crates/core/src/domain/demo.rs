use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{OfflineDataset, Target, Trajectory, Transition};
use super::preference::{l1_distance, normalize_preference, PreferenceVector};
use crate::{Error, Result};

/// A small batch of expert transitions for a hidden target. The target itself is
/// never stored; `source_target` is an opaque bookkeeping string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationSet {
    pub transitions: Vec<Transition>,
    pub source_target: String,
}

impl DemonstrationSet {
    pub fn new(transitions: Vec<Transition>, source_target: impl Into<String>) -> Result<Self> {
        if transitions.is_empty() {
            return Err(Error::Empty("demonstration set"));
        }
        Ok(Self {
            transitions,
            source_target: source_target.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Demonstrations with rewards `[r, -c]`, for cost-augmented learners.
    pub fn augmented(&self) -> DemonstrationSet {
        DemonstrationSet {
            transitions: self.transitions.iter().map(Transition::augmented).collect(),
            source_target: self.source_target.clone(),
        }
    }
}

/// Default demonstration-set size and trajectory count.
pub const DEFAULT_DEMO_M: usize = 128;
pub const DEFAULT_DEMO_K: usize = 2;

/// Cost return of a trajectory, reading negated trailing rewards on augmented data.
pub(crate) fn costs_of(ds: &OfflineDataset, traj: &Trajectory) -> Vec<f64> {
    if ds.augmented {
        let n = ds.n_reward_objectives();
        traj.return_vector()[n..].iter().map(|x| -x).collect()
    } else {
        traj.cost_return().to_vec()
    }
}

pub(crate) fn rewards_of<'a>(ds: &OfflineDataset, traj: &'a Trajectory) -> &'a [f64] {
    &traj.return_vector()[..ds.n_reward_objectives()]
}

/// Reward-objective part of a label, renormalized, for comparison with a target
/// preference of smaller dimension.
pub(crate) fn reward_direction(p: &[f64], dim: usize) -> Vec<f64> {
    if p.len() == dim {
        return p.to_vec();
    }
    normalize_preference(&p[..dim])
        .map(PreferenceVector::into_inner)
        .unwrap_or_else(|_| vec![1.0 / dim as f64; dim])
}

fn is_safe(costs: &[f64], threshold: &[f64]) -> bool {
    costs.iter().zip(threshold).all(|(c, b)| *c <= *b + 1e-9)
}

/// Selects `k` trajectories for `target` and samples `m` transitions from them.
///
/// Preference targets pick the trajectories whose label is L1-closest to the
/// target; threshold targets pick the highest-utility safe trajectories; joint
/// targets first restrict to the behavior-policy group closest to the target
/// preference. Ties are broken by trajectory index.
pub fn build_demo_set<R: Rng + ?Sized>(
    ds: &OfflineDataset,
    target: &Target,
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<DemonstrationSet> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if m == 0 || k == 0 {
        return Err(Error::invalid("demo size m and trajectory count k must be >= 1"));
    }
    target.validate()?;
    let chosen = select_trajectories(ds, target, k)?;
    let pool: Vec<&Transition> = chosen
        .iter()
        .flat_map(|&i| ds.trajectories[i].transitions())
        .collect();
    if pool.is_empty() {
        return Err(Error::Empty("selected trajectories"));
    }
    let transitions: Vec<Transition> = if pool.len() >= m {
        rand::seq::index::sample(rng, pool.len(), m)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    } else {
        (0..m)
            .map(|_| pool[rng.random_range(0..pool.len())].clone())
            .collect()
    };
    DemonstrationSet::new(transitions, target.label())
}

/// Indices of the trajectories a demonstration set is drawn from.
pub fn select_trajectories(ds: &OfflineDataset, target: &Target, k: usize) -> Result<Vec<usize>> {
    let n_rewards = ds.n_reward_objectives();
    match target {
        Target::Preference { preference } => {
            if preference.dim() != n_rewards {
                return Err(Error::DimensionMismatch {
                    expected: n_rewards,
                    got: preference.dim(),
                });
            }
            let mut scored = Vec::with_capacity(ds.trajectories.len());
            for (i, traj) in ds.trajectories.iter().enumerate() {
                let dir = reward_direction(traj.label()?.as_slice(), n_rewards);
                scored.push((l1_distance(&dir, preference.as_slice()), i));
            }
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
        }
        Target::Threshold { threshold } => {
            check_threshold_dim(ds, threshold)?;
            let mut safe: Vec<(f64, usize)> = ds
                .trajectories
                .iter()
                .enumerate()
                .filter(|(_, t)| is_safe(&costs_of(ds, t), threshold))
                .map(|(i, t)| (rewards_of(ds, t).iter().sum::<f64>(), i))
                .collect();
            if safe.is_empty() {
                return Err(Error::InfeasibleTarget(threshold.clone()));
            }
            safe.sort_by(|a, b| b.0.total_cmp(&a.0));
            Ok(safe.into_iter().take(k).map(|(_, i)| i).collect())
        }
        Target::Both {
            preference,
            threshold,
        } => {
            check_threshold_dim(ds, threshold)?;
            if preference.dim() != n_rewards {
                return Err(Error::DimensionMismatch {
                    expected: n_rewards,
                    got: preference.dim(),
                });
            }
            // group key: behavior-policy preference if recorded, else label direction
            let keys: Vec<Vec<f64>> = ds
                .trajectories
                .iter()
                .map(|t| match &t.src {
                    Some(src) => Ok(reward_direction(src.as_slice(), n_rewards)),
                    None => Ok(reward_direction(t.label()?.as_slice(), n_rewards)),
                })
                .collect::<Result<_>>()?;
            let best_key = keys
                .iter()
                .min_by(|a, b| {
                    l1_distance(a, preference.as_slice())
                        .total_cmp(&l1_distance(b, preference.as_slice()))
                })
                .expect("nonempty dataset")
                .clone();
            let mut safe: Vec<(f64, usize)> = ds
                .trajectories
                .iter()
                .enumerate()
                .filter(|(i, t)| keys[*i] == best_key && is_safe(&costs_of(ds, t), threshold))
                .map(|(i, t)| (preference.scalarize(rewards_of(ds, t)), i))
                .collect();
            if safe.is_empty() {
                return Err(Error::InfeasibleTarget(threshold.clone()));
            }
            safe.sort_by(|a, b| b.0.total_cmp(&a.0));
            Ok(safe.into_iter().take(k).map(|(_, i)| i).collect())
        }
    }
}

fn check_threshold_dim(ds: &OfflineDataset, threshold: &[f64]) -> Result<()> {
    let k = if ds.augmented {
        ds.n_augmented_costs
    } else {
        ds.n_constrained
    };
    if threshold.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: threshold.len(),
        });
    }
    Ok(())
}
