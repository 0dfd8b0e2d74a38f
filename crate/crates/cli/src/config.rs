//! Run configuration, read from TOML. Every field has a default.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdoa::adapt::AdaptationConfig;
use pdoa::domain::{PreferenceVector, DEFAULT_DEMO_K, DEFAULT_DEMO_M};
use pdoa::env::{BehaviorPolicySet, CMO_GRID, DEFAULT_LAMBDA_GRID};
use pdoa::learner::{RegularizedConfig, ReturnConditionedConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env_id: String,
    pub out_dir: PathBuf,
    /// Dataset to train on instead of the per-seed generated one.
    pub dataset: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub data: DataConfig,
    pub learner: LearnerConfig,
    pub adapt: AdaptConfig,
    pub targets: TargetConfig,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env_id: CMO_GRID.into(),
            out_dir: PathBuf::from("pdoa-out"),
            dataset: None,
            seeds: vec![1, 2, 3],
            data: DataConfig::default(),
            learner: LearnerConfig::default(),
            adapt: AdaptConfig::default(),
            targets: TargetConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub episodes_per_preference: usize,
    /// Probability of a uniformly random action in the behavior policies.
    pub epsilon: f64,
    /// Pair every behavior preference with every cost multiplier and train on
    /// cost-augmented data.
    pub constrained: bool,
    pub lambda_grid: Vec<f64>,
    /// Behavior preferences; `[w, 1 - w]` for w = 0.5..1.0 when absent.
    pub preferences: Option<Vec<Vec<f64>>>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            episodes_per_preference: 20,
            epsilon: 0.0,
            constrained: false,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            preferences: None,
        }
    }
}

impl DataConfig {
    pub fn behaviors(&self) -> Result<BehaviorPolicySet> {
        let preferences = match &self.preferences {
            Some(ps) => ps
                .iter()
                .map(|p| PreferenceVector::new(p.clone()))
                .collect::<pdoa::Result<_>>()?,
            None => BehaviorPolicySet::default_preferences(),
        };
        Ok(BehaviorPolicySet {
            preferences,
            epsilon: self.epsilon,
            lambda_grid: if self.constrained { self.lambda_grid.clone() } else { Vec::new() },
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    Regularized,
    ReturnConditioned,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub regularized: RegularizedConfig,
    pub return_conditioned: ReturnConditionedConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub steps: usize,
    pub samples: usize,
    pub step_size: f64,
    pub eta: f64,
    pub delta: f64,
    /// CVaR level of the cost-weight read-out.
    pub alpha: f64,
    /// Demonstration transitions per target.
    #[serde(rename = "M")]
    pub m: usize,
    /// Trajectories the demonstrations are drawn from.
    #[serde(rename = "K")]
    pub k: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        let base = AdaptationConfig::constrained(2, 1);
        AdaptConfig {
            steps: base.steps,
            samples: base.samples_per_step,
            step_size: base.step_size,
            eta: base.eta,
            delta: base.delta,
            alpha: base.alpha,
            m: DEFAULT_DEMO_M,
            k: DEFAULT_DEMO_K,
        }
    }
}

impl AdaptConfig {
    pub fn engine(&self, n_unconstrained: usize, n_constrained: usize) -> AdaptationConfig {
        AdaptationConfig {
            steps: self.steps,
            samples_per_step: self.samples,
            step_size: self.step_size,
            eta: self.eta,
            delta: self.delta,
            alpha: self.alpha,
            n_unconstrained,
            n_constrained,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Preference targets spread over the dataset's label support.
    pub preferences: usize,
    /// Threshold groups over the achievable cost range (constrained runs).
    pub thresholds: usize,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            preferences: 11,
            thresholds: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
    /// CVaR levels evaluated; `[adapt.alpha]` when absent.
    pub alphas: Option<Vec<f64>>,
    /// Also evaluate the fine-tuned behavior-cloning baseline.
    pub baseline: bool,
    pub oracle_divisions: usize,
    pub finetune_lr: f64,
    pub finetune_steps: usize,
    pub reference: Option<Vec<f64>>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let base = pdoa::eval::EvalConfig::default();
        EvalSection {
            episodes: base.episodes,
            alphas: None,
            baseline: true,
            oracle_divisions: base.oracle_divisions,
            finetune_lr: base.finetune_lr,
            finetune_steps: base.finetune_steps,
            reference: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config lists no seeds");
        }
        if self.data.episodes_per_preference == 0 {
            bail!("data.episodes_per_preference must be >= 1");
        }
        if self.targets.preferences == 0 {
            bail!("targets.preferences must be >= 1");
        }
        if self.data.constrained && self.targets.thresholds == 0 {
            bail!("targets.thresholds must be >= 1 for constrained runs");
        }
        if self.adapt.m == 0 || self.adapt.k == 0 {
            bail!("adapt.M and adapt.K must be >= 1");
        }
        if self.eval.episodes == 0 {
            bail!("eval.episodes must be >= 1");
        }
        self.adapt.engine(1, 1).validate()?;
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.eval.alphas.clone().unwrap_or_else(|| vec![self.adapt.alpha])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.validate().is_ok());
        assert_eq!((cfg.adapt.m, cfg.adapt.k), (128, 2));
    }

    #[test]
    fn demo_knobs_by_name() {
        let cfg: RunConfig = toml::from_str(
            "seeds = [4]\n[adapt]\neta = 2.0\ndelta = 0.1\nalpha = 0.5\nsteps = 10\nsamples = 8\nstep_size = 0.1\nM = 16\nK = 1\n",
        )
        .unwrap();
        let e = cfg.adapt.engine(2, 1);
        assert_eq!((e.eta, e.delta, e.alpha, e.steps, e.samples_per_step, e.step_size), (2.0, 0.1, 0.5, 10, 8, 0.1));
        assert_eq!((cfg.adapt.m, cfg.adapt.k), (16, 1));
        assert_eq!(cfg.alphas(), vec![0.5]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(toml::from_str::<RunConfig>("unknown = 1").is_err());
        let no_seeds: RunConfig = toml::from_str("seeds = []").unwrap();
        assert!(no_seeds.validate().is_err());
        let bad_alpha: RunConfig = toml::from_str("[adapt]\nalpha = 0.0").unwrap();
        assert!(bad_alpha.validate().is_err());
    }
}
