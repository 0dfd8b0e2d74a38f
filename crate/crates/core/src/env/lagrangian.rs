//! Constrained oracles: Lagrangian grid search and augmented-preference search.

use serde::{Deserialize, Serialize};

use super::dp::scalarized_value_iteration_weights;
use super::mdp::{CmoMdpSpec, TimedPolicy};
use crate::domain::{dot, PreferenceVector};
use crate::{Error, Result};

/// Outcome of a constrained oracle search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SafePolicy {
    pub policy: TimedPolicy,
    /// Multiplier (or augmented cost weight) that produced the policy.
    pub lambda: f64,
    /// Expected undiscounted `w·R` from the initial state.
    pub utility: f64,
    pub expected_return: Vec<f64>,
    pub expected_cost: Vec<f64>,
    pub feasible: bool,
}

/// Episode-level randomization between two deterministic policies: with
/// probability `weight` the episode follows `primary`, otherwise `secondary`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SafeMixture {
    pub primary: SafePolicy,
    pub secondary: Option<SafePolicy>,
    pub weight: f64,
    pub utility: f64,
    pub expected_cost: Vec<f64>,
    pub feasible: bool,
}

/// Best constraint-satisfying mixture of at most two candidates given their
/// `(utility, cost)`; returns `(utility, i, Some((j, weight of i)))`.
///
/// Mixtures are only formed for a single constraint, where the optimum over the
/// convex hull is attained on an edge between a safe and an unsafe point.
pub fn best_safe_mixture(points: &[(f64, Vec<f64>)], beta: &[f64]) -> Option<(f64, usize, Option<(usize, f64)>)> {
    let mut best: Option<(f64, usize, Option<(usize, f64)>)> = None;
    let mut consider = |u: f64, cand: (f64, usize, Option<(usize, f64)>)| {
        if best.as_ref().is_none_or(|b| u > b.0 + 1e-12) {
            best = Some(cand);
        }
    };
    for (i, (u, c)) in points.iter().enumerate() {
        if is_safe(c, beta) {
            consider(*u, (*u, i, None));
        }
    }
    if beta.len() == 1 {
        let b = beta[0];
        for (i, (ui, ci)) in points.iter().enumerate() {
            if ci[0] > b + 1e-9 {
                continue;
            }
            for (j, (uj, cj)) in points.iter().enumerate() {
                if cj[0] <= b + 1e-9 || *uj <= *ui {
                    continue;
                }
                let p = (cj[0] - b) / (cj[0] - ci[0]);
                let u = p * ui + (1.0 - p) * uj;
                consider(u, (u, i, Some((j, p))));
            }
        }
    }
    best
}

fn mix(candidates: Vec<SafePolicy>, beta: &[f64]) -> SafeMixture {
    let points: Vec<(f64, Vec<f64>)> = candidates
        .iter()
        .map(|c| (c.utility, c.expected_cost.clone()))
        .collect();
    match best_safe_mixture(&points, beta) {
        Some((utility, i, other)) => {
            let (secondary, weight) = match other {
                Some((j, p)) => (Some(candidates[j].clone()), p),
                None => (None, 1.0),
            };
            let primary = candidates[i].clone();
            let expected_cost = match &secondary {
                Some(sec) => primary
                    .expected_cost
                    .iter()
                    .zip(&sec.expected_cost)
                    .map(|(a, b)| weight * a + (1.0 - weight) * b)
                    .collect(),
                None => primary.expected_cost.clone(),
            };
            SafeMixture {
                primary,
                secondary,
                weight,
                utility,
                expected_cost,
                feasible: true,
            }
        }
        None => {
            let primary = choose(candidates, beta);
            SafeMixture {
                utility: primary.utility,
                expected_cost: primary.expected_cost.clone(),
                primary,
                secondary: None,
                weight: 1.0,
                feasible: false,
            }
        }
    }
}

fn check(mdp: &CmoMdpSpec, w: &PreferenceVector, beta: &[f64]) -> Result<()> {
    if w.dim() != mdp.n_rewards {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_rewards,
            got: w.dim(),
        });
    }
    if beta.len() != mdp.n_costs {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_costs,
            got: beta.len(),
        });
    }
    Ok(())
}

fn is_safe(cost: &[f64], beta: &[f64]) -> bool {
    cost.iter().zip(beta).all(|(c, b)| *c <= *b + 1e-9)
}

/// Picks the best safe candidate, or the minimum-total-cost one flagged infeasible.
fn choose(candidates: Vec<SafePolicy>, beta: &[f64]) -> SafePolicy {
    let mut best: Option<SafePolicy> = None;
    let mut cheapest: Option<SafePolicy> = None;
    for c in candidates {
        if is_safe(&c.expected_cost, beta) {
            if best.as_ref().is_none_or(|b| c.utility > b.utility + 1e-12) {
                best = Some(c);
            }
        } else {
            let total: f64 = c.expected_cost.iter().sum();
            if cheapest
                .as_ref()
                .is_none_or(|b| total < b.expected_cost.iter().sum::<f64>() - 1e-12)
            {
                cheapest = Some(c);
            }
        }
    }
    match best {
        Some(b) => b,
        None => SafePolicy {
            feasible: false,
            ..cheapest.expect("at least one candidate")
        },
    }
}

fn solve_weighted(mdp: &CmoMdpSpec, aug: &CmoMdpSpec, w: &PreferenceVector, weights: &[f64], lambda: f64) -> Result<SafePolicy> {
    let sol = scalarized_value_iteration_weights(aug, weights)?;
    let (ret, cost) = super::dp::evaluate_timed(mdp, &sol.policy, 1.0);
    Ok(SafePolicy {
        utility: dot(w.as_slice(), &ret),
        policy: sol.policy,
        lambda,
        expected_return: ret,
        expected_cost: cost,
        feasible: true,
    })
}

/// Grid search over a scalar multiplier applied to every cost: solves
/// `w·r − λ·Σc` for each `λ` and keeps the best policy whose expected cost is
/// within `beta`.
pub fn lagrangian_safe_policy(
    mdp: &CmoMdpSpec,
    w: &PreferenceVector,
    beta: &[f64],
    grid: &[f64],
) -> Result<SafePolicy> {
    Ok(choose(multiplier_candidates(mdp, w, beta, grid)?, beta))
}

/// As [`lagrangian_safe_policy`], randomizing between the two policies that
/// bracket the threshold so the constraint can be met with equality.
pub fn lagrangian_safe_mixture(
    mdp: &CmoMdpSpec,
    w: &PreferenceVector,
    beta: &[f64],
    grid: &[f64],
) -> Result<SafeMixture> {
    Ok(mix(multiplier_candidates(mdp, w, beta, grid)?, beta))
}

fn multiplier_candidates(
    mdp: &CmoMdpSpec,
    w: &PreferenceVector,
    beta: &[f64],
    grid: &[f64],
) -> Result<Vec<SafePolicy>> {
    check(mdp, w, beta)?;
    if grid.is_empty() {
        return Err(Error::Empty("multiplier grid"));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("multipliers must be finite and nonnegative"));
    }
    let aug = mdp.augmented();
    grid.iter()
        .map(|&lambda| {
            let mut weights = w.as_slice().to_vec();
            weights.extend(std::iter::repeat_n(lambda, mdp.n_costs));
            solve_weighted(mdp, &aug, w, &weights, lambda)
        })
        .collect()
}

/// Enumerates augmented preferences `[ω_r, ω_c]` on a regular simplex grid of
/// the given step and keeps the best mixture (measured by `w·R`) of the
/// resulting greedy policies whose expected cost is within `beta`. `lambda`
/// on each policy reports its total cost weight.
pub fn augmented_preference_search(
    mdp: &CmoMdpSpec,
    w: &PreferenceVector,
    beta: &[f64],
    step: f64,
) -> Result<SafeMixture> {
    check(mdp, w, beta)?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("grid step {step} not in (0, 1]")));
    }
    let aug = mdp.augmented();
    let divisions = (1.0 / step).round() as usize;
    let candidates = simplex_grid(aug.n_rewards, divisions)
        .into_iter()
        .filter(|p| p[..mdp.n_rewards].iter().sum::<f64>() > 0.0)
        .map(|p| {
            let lambda = p[mdp.n_rewards..].iter().sum();
            solve_weighted(mdp, &aug, w, &p, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mix(candidates, beta))
}

/// All points of the `dim`-simplex with coordinates in multiples of `1/divisions`.
pub fn simplex_grid(dim: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(dim, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut ints = Vec::new();
    if dim > 0 {
        rec(dim, divisions, &mut Vec::new(), &mut ints);
    }
    let d = divisions.max(1) as f64;
    ints.into_iter()
        .map(|v| v.into_iter().map(|k| k as f64 / d).collect())
        .collect()
}
