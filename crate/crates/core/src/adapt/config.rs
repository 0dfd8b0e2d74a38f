use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Knobs of the adaptation engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub steps: usize,
    pub samples_per_step: usize,
    pub step_size: f64,
    /// Weight of the `(‖μ‖₁ − 1)²` penalty.
    pub eta: f64,
    /// Weight of the TD reward.
    pub delta: f64,
    /// CVaR level for the constrained read-out; 1 disables conservatism.
    pub alpha: f64,
    pub n_unconstrained: usize,
    pub n_constrained: usize,
}

impl AdaptationConfig {
    pub fn unconstrained(n: usize) -> Self {
        AdaptationConfig {
            steps: 1000,
            samples_per_step: 64,
            step_size: 0.05,
            eta: 1.0,
            delta: 0.01,
            alpha: 1.0,
            n_unconstrained: n,
            n_constrained: 0,
        }
    }

    /// `n` reward objectives and `k` cost objectives, with α = 0.7.
    pub fn constrained(n: usize, k: usize) -> Self {
        AdaptationConfig {
            alpha: 0.7,
            n_constrained: k,
            ..Self::unconstrained(n)
        }
    }

    pub fn dim(&self) -> usize {
        self.n_unconstrained + self.n_constrained
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if self.samples_per_step < 2 {
            return Err(Error::invalid("samples_per_step must be >= 2"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(self.delta >= 0.0) || !(self.eta >= 0.0) {
            return Err(Error::invalid("delta and eta must be nonnegative"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step_size must be positive"));
        }
        if self.dim() == 0 {
            return Err(Error::invalid("preference dimension must be >= 1"));
        }
        Ok(())
    }
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self::unconstrained(2)
    }
}
