//! Preference-distribution adaptation from demonstrations.
//!
//! A diagonal Gaussian over (possibly cost-augmented) preferences is fitted so
//! that preferences drawn from it explain the demonstrations under the trained
//! [`PolicyBundle`](crate::learner::PolicyBundle): the likelihood surrogate is the
//! policy log-probability plus a TD-consistency reward. The target preference is
//! read off the fitted distribution, conservatively for cost components.

mod config;
mod cvar;
mod objective;
mod optimize;

pub use config::AdaptationConfig;
pub use cvar::conservative_estimate;
pub use objective::{
    adaptation_objective, demo_reward_term, estimate_gradient, query_preference, sample_reward, td_reward,
    DemoBatch, ObjectiveEstimate,
};
pub use optimize::{adapt_distribution, adapt_distribution_traced, TraceRow, MAX_NONFINITE_STEPS};

use serde::{Deserialize, Serialize};

use crate::domain::{normalize_preference, DemonstrationSet, GaussianPreferenceDistribution, PreferenceVector};
use crate::learner::{AdaptedPolicy, PolicyBundle};
use crate::Result;

/// Result of adapting to one demonstration set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adaptation {
    pub distribution: GaussianPreferenceDistribution,
    pub trace: Vec<TraceRow>,
}

impl Adaptation {
    /// Target preference at CVaR level `alpha`: the normalized mean, with cost
    /// components replaced by their upper-tail mean.
    pub fn preference(&self, alpha: f64, n: usize, k: usize) -> Result<PreferenceVector> {
        normalize_preference(&conservative_estimate(&self.distribution, alpha, n, k)?)
    }
}

/// Adapts the preference distribution and reads off the target preference.
pub fn pdoa<'a>(
    bundle: &'a PolicyBundle,
    demos: &DemonstrationSet,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
    seed: u64,
) -> Result<(PreferenceVector, AdaptedPolicy<'a>, Adaptation)> {
    let (distribution, trace) = adapt_distribution_traced(bundle, demos, prior, cfg, seed)?;
    let adaptation = Adaptation { distribution, trace };
    let w = adaptation.preference(cfg.alpha, cfg.n_unconstrained, cfg.n_constrained)?;
    let policy = AdaptedPolicy::new(bundle, w.as_slice())?;
    Ok((w, policy, adaptation))
}
