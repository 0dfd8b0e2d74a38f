//! Demonstration likelihood surrogate, adaptation loss and its gradient.

use crate::domain::{normalize_preference, DemonstrationSet, GaussianPreferenceDistribution, Transition};
use crate::learner::{BundleView, PolicyBundle};
use crate::{Error, Result};

use super::config::AdaptationConfig;

/// `−δ ‖Q(s, a, ω) − (r + γ V(s', ω))‖²`; zero for bundles without values.
pub fn td_reward(bundle: &PolicyBundle, t: &Transition, w: &[f64], delta: f64) -> Result<f64> {
    bundle.check_ids(t.s, Some(t.a))?;
    bundle.check_ids(t.s2, None)?;
    let view = bundle.view(w)?;
    let mut scratch = Scratch::new(bundle.dim());
    td_reward_view(bundle, &view, t, delta, &mut scratch)
}

struct Scratch {
    q: Vec<f64>,
    v: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            q: vec![0.0; d],
            v: vec![0.0; d],
        }
    }
}

fn td_reward_view(bundle: &PolicyBundle, view: &BundleView<'_>, t: &Transition, delta: f64, sc: &mut Scratch) -> Result<f64> {
    let PolicyBundle::Regularized(model) = bundle else {
        return Ok(0.0);
    };
    if delta == 0.0 {
        return Ok(0.0);
    }
    if t.r.len() != sc.q.len() {
        return Err(Error::DimensionMismatch {
            expected: sc.q.len(),
            got: t.r.len(),
        });
    }
    view.q_into(t.s, t.a, &mut sc.q)?;
    view.v_into(t.s2, &mut sc.v)?;
    let sq: f64 = (0..sc.q.len())
        .map(|i| {
            let e = sc.q[i] - (t.r[i] + model.gamma * sc.v[i]);
            e * e
        })
        .sum();
    Ok(-delta * sq)
}

/// Demonstrations collapsed to distinct transitions with multiplicities, in the
/// bundle's (possibly cost-augmented) reward space.
#[derive(Clone, Debug)]
pub struct DemoBatch {
    items: Vec<(Transition, f64)>,
    total: usize,
}

impl DemoBatch {
    pub fn new(bundle: &PolicyBundle, demos: &DemonstrationSet) -> Result<Self> {
        if demos.is_empty() {
            return Err(Error::Empty("demonstration set"));
        }
        let mut items: Vec<(Transition, f64)> = Vec::new();
        for t in &demos.transitions {
            let t = if t.c.is_empty() { t.clone() } else { t.augmented() };
            if t.r.len() != bundle.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bundle.dim(),
                    got: t.r.len(),
                });
            }
            bundle.check_ids(t.s, Some(t.a))?;
            bundle.check_ids(t.s2, None)?;
            match items.iter_mut().find(|(u, _)| *u == t) {
                Some(e) => e.1 += 1.0,
                None => items.push((t, 1.0)),
            }
        }
        Ok(DemoBatch {
            items,
            total: demos.len(),
        })
    }

    /// Number of demonstrations `M` (with repeats).
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Preference used for bundle queries: negatives clamped and rescaled to the
/// simplex, or uniform when nothing positive remains.
pub fn query_preference(raw: &[f64]) -> Vec<f64> {
    normalize_preference(raw)
        .map(|p| p.into_inner())
        .unwrap_or_else(|_| vec![1.0 / raw.len() as f64; raw.len()])
}

/// Demo-averaged `(1/M) Σ (r_TD + log π(a|s, ω))` at a query preference.
pub fn demo_reward_term(bundle: &PolicyBundle, batch: &DemoBatch, w: &[f64], delta: f64) -> Result<f64> {
    let view = bundle.view(w)?;
    let mut sc = Scratch::new(bundle.dim());
    let mut total = 0.0;
    for (t, n) in &batch.items {
        let td = td_reward_view(bundle, &view, t, delta, &mut sc)?;
        let lp = view.logprob(t.s, t.a, None)?;
        total += n * (td + lp);
    }
    Ok(total / batch.total as f64)
}

/// Per-sample integrand `f(ω)` of the expectation term: the demo reward at the
/// clamp-normalized `ω` plus the prior log-density at raw `ω`, divided by `M`.
pub fn sample_reward(
    bundle: &PolicyBundle,
    batch: &DemoBatch,
    prior: &GaussianPreferenceDistribution,
    delta: f64,
    raw: &[f64],
) -> Result<f64> {
    let q = query_preference(raw);
    Ok(demo_reward_term(bundle, batch, &q, delta)? + prior.log_density(raw) / batch.total as f64)
}

fn penalty(cfg: &AdaptationConfig, mean: &[f64]) -> f64 {
    let l1: f64 = mean.iter().map(|x| x.abs()).sum();
    cfg.eta * (l1 - 1.0).powi(2)
}

fn check_dims(
    bundle: &PolicyBundle,
    dist: &GaussianPreferenceDistribution,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
) -> Result<()> {
    for got in [dist.dim(), prior.dim(), cfg.dim()] {
        if got != bundle.dim() {
            return Err(Error::DimensionMismatch {
                expected: bundle.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// Monte-Carlo adaptation loss
/// `−mean_ω f(ω) − H(p)/M + η(‖μ‖₁ − 1)²` over the given samples.
pub fn adaptation_objective(
    bundle: &PolicyBundle,
    demos: &DemonstrationSet,
    dist: &GaussianPreferenceDistribution,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
    sampled_w: &[Vec<f64>],
) -> Result<f64> {
    check_dims(bundle, dist, prior, cfg)?;
    let batch = DemoBatch::new(bundle, demos)?;
    if sampled_w.is_empty() {
        return Err(Error::Empty("preference samples"));
    }
    let mut mean_f = 0.0;
    for w in sampled_w {
        mean_f += sample_reward(bundle, &batch, prior, cfg.delta, w)? / sampled_w.len() as f64;
    }
    Ok(objective_from_mean(cfg, dist, batch.len(), mean_f))
}

fn objective_from_mean(cfg: &AdaptationConfig, dist: &GaussianPreferenceDistribution, m: usize, mean_f: f64) -> f64 {
    -mean_f - dist.entropy() / m as f64 + penalty(cfg, &dist.mean)
}

/// Objective estimate with its score-function gradient.
#[derive(Clone, Debug)]
pub struct ObjectiveEstimate {
    pub objective: f64,
    pub grad_mean: Vec<f64>,
    /// Gradient with respect to `ln σ`.
    pub grad_log_std: Vec<f64>,
}

/// Evaluates the loss at samples `μ + σ ε` and estimates its gradient.
///
/// The expectation term uses the score-function estimator with the sample-mean
/// baseline; entropy and the L1 penalty are differentiated exactly.
pub fn estimate_gradient(
    bundle: &PolicyBundle,
    batch: &DemoBatch,
    dist: &GaussianPreferenceDistribution,
    prior: &GaussianPreferenceDistribution,
    cfg: &AdaptationConfig,
    noise: &[Vec<f64>],
) -> Result<ObjectiveEstimate> {
    check_dims(bundle, dist, prior, cfg)?;
    if noise.len() < 2 {
        return Err(Error::invalid("gradient estimate needs at least two samples"));
    }
    let d = dist.dim();
    let samples: Vec<Vec<f64>> = noise
        .iter()
        .map(|e| (0..d).map(|i| dist.mean[i] + dist.stddev[i] * e[i]).collect())
        .collect();
    let f: Vec<f64> = samples
        .iter()
        .map(|w| sample_reward(bundle, batch, prior, cfg.delta, w))
        .collect::<Result<_>>()?;
    let n = f.len() as f64;
    let f_bar = f.iter().sum::<f64>() / n;
    let mut g_mu = vec![0.0; d];
    let mut g_ls = vec![0.0; d];
    for (e, fj) in noise.iter().zip(&f) {
        let c = fj - f_bar;
        for i in 0..d {
            g_mu[i] += c * e[i] / dist.stddev[i] / n;
            g_ls[i] += c * (e[i] * e[i] - 1.0) / n;
        }
    }
    let m = batch.len() as f64;
    let l1: f64 = dist.mean.iter().map(|x| x.abs()).sum();
    let grad_mean = (0..d)
        .map(|i| {
            let sign = if dist.mean[i] == 0.0 { 0.0 } else { dist.mean[i].signum() };
            -g_mu[i] + 2.0 * cfg.eta * (l1 - 1.0) * sign
        })
        .collect();
    let grad_log_std = g_ls.iter().map(|g| -g - 1.0 / m).collect();
    Ok(ObjectiveEstimate {
        objective: objective_from_mean(cfg, dist, batch.len(), f_bar),
        grad_mean,
        grad_log_std,
    })
}
