//! Domain types: preferences, transitions, datasets, demonstrations and priors.

mod dataset;
pub(crate) mod demo;
pub mod jsonl;
mod preference;
mod prior;

pub use dataset::{
    approx_behavioral_preference, augment_dataset, CostVector, OfflineDataset, RewardVector,
    Target, Trajectory, Transition,
};
pub use demo::{build_demo_set, select_trajectories, DemonstrationSet, DEFAULT_DEMO_K, DEFAULT_DEMO_M};
pub use preference::{
    dot, l1_distance, normalize_preference, project_to_box_simplex, PreferenceVector, SIMPLEX_TOL,
};
pub use prior::{fit_preference_prior, GaussianPreferenceDistribution, PRIOR_STD_FLOOR};
