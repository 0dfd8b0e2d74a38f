//! Stochastic optimization of the preference distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::AdaptationConfig;
use super::objective::{estimate_gradient, DemoBatch};
use crate::domain::{DemonstrationSet, GaussianPreferenceDistribution};
use crate::learner::PolicyBundle;
use crate::{Error, Result};

/// Consecutive non-finite iterations tolerated before giving up.
pub const MAX_NONFINITE_STEPS: usize = 10;

/// One optimizer step: the loss estimate before the update and the parameters after.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub objective: f64,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Fits `N(μ, diag σ²)` to the demonstrations, starting from the prior.
pub fn adapt_distribution(
    bundle: &PolicyBundle,
    demos: &DemonstrationSet,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
    seed: u64,
) -> Result<GaussianPreferenceDistribution> {
    adapt_distribution_traced(bundle, demos, prior, cfg, seed).map(|(d, _)| d)
}

/// As [`adapt_distribution`], also returning the per-step trace.
pub fn adapt_distribution_traced(
    bundle: &PolicyBundle,
    demos: &DemonstrationSet,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
    seed: u64,
) -> Result<(GaussianPreferenceDistribution, Vec<TraceRow>)> {
    cfg.validate()?;
    let batch = DemoBatch::new(bundle, demos)?;
    let d = prior.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: Vec<f64> = prior.mean.iter().cloned().chain(prior.stddev.iter().map(|s| s.ln())).collect();
    let mut adam = Adam::new(2 * d, cfg.step_size);
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut bad_streak = 0;
    for step in 1..=cfg.steps {
        let dist = GaussianPreferenceDistribution {
            mean: params[..d].to_vec(),
            stddev: params[d..].iter().map(|l| l.exp()).collect(),
        };
        let noise: Vec<Vec<f64>> = (0..cfg.samples_per_step)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let est = estimate_gradient(bundle, &batch, &dist, prior, cfg, &noise)?;
        let grad: Vec<f64> = est.grad_mean.iter().chain(&est.grad_log_std).cloned().collect();
        let finite = est.objective.is_finite()
            && grad.iter().all(|g| g.is_finite())
            && dist.stddev.iter().all(|s| s.is_finite() && *s > 0.0);
        if !finite {
            bad_streak += 1;
            if bad_streak >= MAX_NONFINITE_STEPS {
                return Err(Error::Divergence(step));
            }
            continue;
        }
        bad_streak = 0;
        adam.step(&mut params, &grad);
        trace.push(TraceRow {
            step,
            objective: est.objective,
            mean: params[..d].to_vec(),
            stddev: params[d..].iter().map(|l| l.exp()).collect(),
        });
    }
    let out = GaussianPreferenceDistribution::new(params[..d].to_vec(), params[d..].iter().map(|l| l.exp()).collect())?;
    Ok((out, trace))
}
