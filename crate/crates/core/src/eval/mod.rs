//! Utility and hypervolume metrics, and the per-target evaluation driver.
//!
//! CSV columns (one row per target, method and CVaR level): `target_index`,
//! `method`, `alpha`, `target`, `adapted_preference`, `return_0..`, `cost_0..`,
//! `utility`. Vector-valued cells are `/`-separated.

mod metrics;

pub use metrics::{average_utility, hypervolume, hypervolume_monte_carlo, pareto_filter, utility_weights};

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{adapt_distribution, AdaptationConfig, Adaptation};
use crate::baseline::{bc_finetune, TabularStochasticPolicy, DEFAULT_FINETUNE_LR, DEFAULT_FINETUNE_STEPS};
use crate::domain::demo::{costs_of, reward_direction, rewards_of};
use crate::domain::{
    build_demo_set, l1_distance, DemonstrationSet, GaussianPreferenceDistribution, OfflineDataset, PreferenceVector, Target,
    DEFAULT_DEMO_K, DEFAULT_DEMO_M,
};
use crate::env::{mean_returns, rollout, simplex_grid, CmoMdpSpec, EpisodeReturn};
use crate::learner::{AdaptedPolicy, PolicyBundle};
use crate::{Error, Result};

use metrics::same_threshold;

/// Targets evaluated together; constrained targets are grouped by threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    targets: Vec<Target>,
}

impl TargetSet {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Empty("target set"));
        }
        for t in &targets {
            t.validate()?;
        }
        Ok(TargetSet { targets })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Distinct thresholds in order of first appearance.
    pub fn thresholds(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for b in self.targets.iter().filter_map(Target::threshold) {
            if !out.iter().any(|o| same_threshold(o, b)) {
                out.push(b.to_vec());
            }
        }
        out
    }

    /// `count` preference targets spread over the reward-direction support of the
    /// dataset's behavioral labels.
    pub fn preference_grid(ds: &OfflineDataset, count: usize) -> Result<Self> {
        Self::new(
            preference_grid(ds, count)?
                .into_iter()
                .map(|preference| Target::Preference { preference })
                .collect(),
        )
    }

    /// Every combination of `prefs` grid preferences with `thresholds`
    /// equidistant thresholds over the achievable cost range, grouped by threshold.
    pub fn constrained_grid(ds: &OfflineDataset, prefs: usize, thresholds: usize) -> Result<Self> {
        let grid = preference_grid(ds, prefs)?;
        let mut targets = Vec::new();
        for threshold in threshold_grid(ds, thresholds)? {
            for preference in &grid {
                targets.push(Target::Both {
                    preference: preference.clone(),
                    threshold: threshold.clone(),
                });
            }
        }
        Self::new(targets)
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|i| round6(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Two objectives: `count` equidistant weights between the extreme labels.
/// More objectives: the `count - 1`-division simplex grid inside the label box.
fn preference_grid(ds: &OfflineDataset, count: usize) -> Result<Vec<PreferenceVector>> {
    if count == 0 {
        return Err(Error::invalid("preference target count must be >= 1"));
    }
    let n = ds.n_reward_objectives();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for t in &ds.trajectories {
        let d = reward_direction(t.label()?.as_slice(), n);
        for i in 0..n {
            lo[i] = lo[i].min(round6(d[i]));
            hi[i] = hi[i].max(round6(d[i]));
        }
    }
    if ds.trajectories.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if n == 1 {
        return Ok(vec![PreferenceVector::new(vec![1.0])?]);
    }
    if n == 2 {
        return linspace(lo[0], hi[0], count)
            .into_iter()
            .map(|w| PreferenceVector::new(vec![w, 1.0 - w]))
            .collect();
    }
    let inside: Vec<PreferenceVector> = simplex_grid(n, count.max(2) - 1)
        .into_iter()
        .filter(|p| p.iter().zip(lo.iter().zip(&hi)).all(|(x, (l, h))| *x >= l - 1e-9 && *x <= h + 1e-9))
        .map(PreferenceVector::new)
        .collect::<Result<_>>()?;
    if inside.is_empty() {
        return Err(Error::Empty("preference grid inside label support"));
    }
    Ok(inside)
}

/// Equidistant thresholds per cost component, spanning the cost returns of the
/// trajectories not dominated in (reward, -cost).
fn threshold_grid(ds: &OfflineDataset, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::invalid("threshold count must be >= 1"));
    }
    let points: Vec<(Vec<f64>, Vec<f64>)> = ds
        .trajectories
        .iter()
        .map(|t| {
            let c = costs_of(ds, t);
            let mut p = rewards_of(ds, t).to_vec();
            p.extend(c.iter().map(|x| -x));
            (p, c)
        })
        .collect();
    let k = points.first().map_or(0, |p| p.1.len());
    if k == 0 {
        return Err(Error::NothingToAugment);
    }
    let front = pareto_filter(&points.iter().map(|p| p.0.clone()).collect::<Vec<_>>());
    let costs: Vec<&Vec<f64>> = points
        .iter()
        .filter(|p| front.contains(&p.0))
        .map(|p| &p.1)
        .collect();
    let per_component: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let lo = costs.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min);
            let hi = costs.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max);
            linspace(lo, hi, count)
        })
        .collect();
    Ok((0..count)
        .map(|i| per_component.iter().map(|c| c[i]).collect())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adapted preference read off the fitted distribution.
    Pdoa,
    /// Best preference given knowledge of the target.
    Oracle,
    /// Behavior cloning fine-tuned on the demonstrations.
    BcFinetune,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pdoa => "pdoa",
            Method::Oracle => "oracle",
            Method::BcFinetune => "bc_finetune",
        }
    }
}

/// One rolled-out policy for one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub target_index: usize,
    pub method: Method,
    pub alpha: Option<f64>,
    pub target: Target,
    pub adapted_preference: PreferenceVector,
    pub return_vector: Vec<f64>,
    pub cost_return: Vec<f64>,
    pub utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub demo_size: usize,
    pub demo_trajectories: usize,
    /// CVaR levels read off each adapted distribution.
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    /// Cost-weight grid resolution of the oracle search.
    pub oracle_divisions: usize,
    pub finetune_lr: f64,
    pub finetune_steps: usize,
    /// Hypervolume reference point; zero when absent.
    pub reference: Option<Vec<f64>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 5,
            demo_size: DEFAULT_DEMO_M,
            demo_trajectories: DEFAULT_DEMO_K,
            alphas: vec![1.0],
            methods: vec![Method::Pdoa],
            oracle_divisions: 100,
            finetune_lr: DEFAULT_FINETUNE_LR,
            finetune_steps: DEFAULT_FINETUNE_STEPS,
            reference: None,
        }
    }
}

/// What the driver evaluates against.
pub struct EvalContext<'a> {
    pub bundle: &'a PolicyBundle,
    /// Environment the policies are rolled out in, with its original costs.
    pub mdp: &'a CmoMdpSpec,
    /// Dataset demonstrations are drawn from.
    pub dataset: &'a OfflineDataset,
    pub prior: &'a GaussianPreferenceDistribution,
    pub baseline: Option<&'a TabularStochasticPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: Method,
    pub alpha: Option<f64>,
    pub threshold: Option<Vec<f64>>,
    pub rows: usize,
    pub max_cost: Vec<f64>,
    pub violated: bool,
    pub average_utility: f64,
    pub hypervolume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub alpha: Option<f64>,
    pub average_utility: f64,
    /// Mean over threshold groups of each group's hypervolume.
    pub hypervolume: f64,
    pub groups: usize,
    pub violating_groups: usize,
    /// Mean L1 distance between the reward part of the adapted preference and the
    /// target preference; absent for the cloning baseline.
    pub preference_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub reference: Vec<f64>,
    pub methods: Vec<MethodSummary>,
    pub groups: Vec<GroupSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: Vec<EvaluationRow>,
    pub summary: EvaluationSummary,
}

fn row_for(
    index: usize,
    method: Method,
    alpha: Option<f64>,
    target: &Target,
    adapted_preference: PreferenceVector,
    ret: EpisodeReturn,
) -> EvaluationRow {
    let w = utility_weights(target.preference(), ret.return_vector.len());
    EvaluationRow {
        target_index: index,
        method,
        alpha,
        target: target.clone(),
        adapted_preference,
        utility: crate::domain::dot(&w, &ret.return_vector),
        return_vector: ret.return_vector,
        cost_return: ret.cost_return,
    }
}

fn run_policy(ctx: &EvalContext<'_>, w: &[f64], episodes: usize, seed: u64) -> Result<EpisodeReturn> {
    let policy = AdaptedPolicy::new(ctx.bundle, w)?;
    Ok(mean_returns(&rollout(ctx.mdp, &policy, episodes, seed)))
}

fn excess(cost: &[f64], threshold: &[f64]) -> f64 {
    cost.iter().zip(threshold).map(|(c, b)| (c - b).max(0.0)).sum()
}

/// Best-performing preference for `target` among those sharing its reward direction.
fn oracle_row(
    ctx: &EvalContext<'_>,
    index: usize,
    target: &Target,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EvaluationRow> {
    let n = ctx.mdp.n_rewards;
    let dim = ctx.bundle.dim();
    let direction = utility_weights(target.preference(), n);
    let dsum: f64 = direction.iter().sum();
    let direction: Vec<f64> = direction.iter().map(|x| x / dsum).collect();
    let candidates: Vec<Vec<f64>> = match target.threshold() {
        Some(_) if dim > n => simplex_grid(dim - n + 1, cfg.oracle_divisions)
            .into_iter()
            .map(|x| {
                let mut w: Vec<f64> = direction.iter().map(|d| d * x[0]).collect();
                w.extend_from_slice(&x[1..]);
                w
            })
            .collect(),
        _ => {
            let mut w = direction.clone();
            w.resize(dim, 0.0);
            vec![w]
        }
    };
    let threshold = target.threshold();
    let mut best: Option<(bool, f64, Vec<f64>, EpisodeReturn)> = None;
    for w in candidates {
        let ret = run_policy(ctx, &w, cfg.episodes, seed)?;
        let u = crate::domain::dot(&direction, &ret.return_vector);
        let (safe, score) = match threshold {
            Some(b) if excess(&ret.cost_return, b) > 1e-9 => (false, -excess(&ret.cost_return, b)),
            _ => (true, u),
        };
        let better = match &best {
            None => true,
            Some((bs, bscore, _, _)) => (safe && !bs) || (safe == *bs && score > *bscore),
        };
        if better {
            best = Some((safe, score, w, ret));
        }
    }
    let (_, _, w, ret) = best.expect("at least one candidate");
    Ok(row_for(index, Method::Oracle, None, target, PreferenceVector::new(w)?, ret))
}

/// Demonstrations and derived seeds for one target of a seeded run.
#[derive(Clone, Debug)]
pub struct TargetDemos {
    pub demos: DemonstrationSet,
    pub adapt_seed: u64,
    pub rollout_seed: u64,
}

/// Draws target `index`'s demonstrations from its own random stream of `seed`.
pub fn target_demos(
    ds: &OfflineDataset,
    target: &Target,
    index: usize,
    demo_size: usize,
    demo_trajectories: usize,
    seed: u64,
) -> Result<TargetDemos> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let demos = build_demo_set(ds, target, demo_size, demo_trajectories, &mut rng)?;
    Ok(TargetDemos {
        demos,
        adapt_seed: rng.next_u64(),
        rollout_seed: rng.next_u64(),
    })
}

fn evaluate_one(
    ctx: &EvalContext<'_>,
    index: usize,
    target: &Target,
    adapt: &AdaptationConfig,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<EvaluationRow>> {
    let TargetDemos {
        demos,
        adapt_seed,
        rollout_seed,
    } = target_demos(ctx.dataset, target, index, cfg.demo_size, cfg.demo_trajectories, seed)?;
    let mut rows = Vec::new();
    for method in &cfg.methods {
        match method {
            Method::Pdoa => {
                let distribution = adapt_distribution(ctx.bundle, &demos, ctx.prior, adapt, adapt_seed)?;
                let adaptation = Adaptation {
                    distribution,
                    trace: Vec::new(),
                };
                for &alpha in &cfg.alphas {
                    let w = adaptation.preference(alpha, adapt.n_unconstrained, adapt.n_constrained)?;
                    let ret = run_policy(ctx, w.as_slice(), cfg.episodes, rollout_seed)?;
                    rows.push(row_for(index, Method::Pdoa, Some(alpha), target, w, ret));
                }
            }
            Method::Oracle => rows.push(oracle_row(ctx, index, target, cfg, rollout_seed)?),
            Method::BcFinetune => {
                let base = ctx
                    .baseline
                    .ok_or_else(|| Error::invalid("bc_finetune evaluation needs a baseline policy"))?;
                let tuned = bc_finetune(base, &demos, cfg.finetune_lr, cfg.finetune_steps)?;
                let ret = mean_returns(&rollout(ctx.mdp, &tuned, cfg.episodes, rollout_seed));
                let w = target
                    .preference()
                    .cloned()
                    .unwrap_or_else(|| PreferenceVector::uniform(ctx.mdp.n_rewards));
                rows.push(row_for(index, Method::BcFinetune, None, target, w, ret));
            }
        }
    }
    Ok(rows)
}

/// Adapts to a demonstration set per target, rolls the resulting policies out and
/// summarizes per method and threshold group. Targets run in parallel; each uses
/// its own random stream, so results do not depend on the worker count.
pub fn evaluate_targets(
    ctx: &EvalContext<'_>,
    targets: &TargetSet,
    adapt: &AdaptationConfig,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Evaluation> {
    if cfg.episodes == 0 {
        return Err(Error::invalid("episodes must be >= 1"));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Empty("method list"));
    }
    adapt.validate()?;
    if ctx.bundle.dim() != adapt.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.bundle.dim(),
            got: adapt.dim(),
        });
    }
    let per_target: Vec<Vec<EvaluationRow>> = targets
        .targets()
        .par_iter()
        .enumerate()
        .map(|(i, t)| evaluate_one(ctx, i, t, adapt, cfg, seed))
        .collect::<Result<_>>()?;
    let rows: Vec<EvaluationRow> = per_target.into_iter().flatten().collect();
    let reference = cfg
        .reference
        .clone()
        .unwrap_or_else(|| vec![0.0; ctx.mdp.n_rewards]);
    let summary = summarize(&rows, &targets.thresholds(), &reference)?;
    Ok(Evaluation { rows, summary })
}

/// Per-(method, alpha) and per-threshold-group aggregates of `rows`.
pub fn summarize(rows: &[EvaluationRow], thresholds: &[Vec<f64>], reference: &[f64]) -> Result<EvaluationSummary> {
    let mut keys: Vec<(Method, Option<f64>)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.method, r.alpha)) {
            keys.push((r.method, r.alpha));
        }
    }
    let mut methods = Vec::new();
    let mut groups = Vec::new();
    for (method, alpha) in keys {
        let mine: Vec<EvaluationRow> = rows
            .iter()
            .filter(|r| r.method == method && r.alpha == alpha)
            .cloned()
            .collect();
        let buckets: Vec<(Option<Vec<f64>>, Vec<&EvaluationRow>)> = if thresholds.is_empty() {
            vec![(None, mine.iter().collect())]
        } else {
            thresholds
                .iter()
                .map(|b| {
                    let in_group = mine
                        .iter()
                        .filter(|r| r.target.threshold().is_some_and(|t| same_threshold(t, b)))
                        .collect();
                    (Some(b.clone()), in_group)
                })
                .collect()
        };
        let mut hv_total = 0.0;
        let mut violating = 0;
        let mut n_groups = 0;
        for (threshold, members) in buckets {
            if members.is_empty() {
                continue;
            }
            let k = members[0].cost_return.len();
            let max_cost: Vec<f64> = (0..k)
                .map(|j| members.iter().map(|r| r.cost_return[j]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let violated = threshold
                .as_ref()
                .is_some_and(|b| max_cost.iter().zip(b).any(|(c, b)| *c > b + 1e-9));
            let points: Vec<Vec<f64>> = members.iter().map(|r| r.return_vector.clone()).collect();
            let hv = hypervolume(&pareto_filter(&points), reference)?;
            let avg = members.iter().map(|r| r.utility).sum::<f64>() / members.len() as f64;
            hv_total += hv;
            violating += violated as usize;
            n_groups += 1;
            groups.push(GroupSummary {
                method,
                alpha,
                threshold,
                rows: members.len(),
                max_cost,
                violated,
                average_utility: avg,
                hypervolume: hv,
            });
        }
        let errors: Vec<f64> = mine
            .iter()
            .filter(|r| r.method != Method::BcFinetune)
            .filter_map(|r| {
                let p = r.target.preference()?;
                let a = r.adapted_preference.as_slice();
                (a.len() >= p.dim()).then(|| l1_distance(&reward_direction(a, p.dim()), p.as_slice()))
            })
            .collect();
        methods.push(MethodSummary {
            method,
            alpha,
            average_utility: average_utility(&mine, None)?,
            hypervolume: hv_total / n_groups.max(1) as f64,
            groups: n_groups,
            violating_groups: violating,
            preference_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        });
    }
    Ok(EvaluationSummary {
        reference: reference.to_vec(),
        methods,
        groups,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/")
}

/// Writes one CSV record per row.
pub fn write_rows_csv<W: Write>(rows: &[EvaluationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = rows.first().map_or(0, |r| r.return_vector.len());
    let k = rows.first().map_or(0, |r| r.cost_return.len());
    let mut header: Vec<String> = ["target_index", "method", "alpha", "target", "adapted_preference"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n).map(|i| format!("return_{i}")));
    header.extend((0..k).map(|j| format!("cost_{j}")));
    header.push("utility".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.target_index.to_string(),
            r.method.name().to_string(),
            r.alpha.map_or(String::new(), |a| a.to_string()),
            r.target.label(),
            join(r.adapted_preference.as_slice()),
        ];
        rec.extend(r.return_vector.iter().map(|x| x.to_string()));
        rec.extend(r.cost_return.iter().map(|x| x.to_string()));
        rec.push(r.utility.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
