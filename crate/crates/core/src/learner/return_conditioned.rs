//! Kernel-weighted return-conditioned action model and the return predictor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::{l1_distance, OfflineDataset};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReturnConditionedConfig {
    pub bandwidth_g: f64,
    pub bandwidth_w: f64,
    /// Pseudo-count added to every action.
    pub smoothing: f64,
    /// Dominance tolerance for the return predictor's training set.
    pub tolerance: f64,
}

impl Default for ReturnConditionedConfig {
    fn default() -> Self {
        ReturnConditionedConfig {
            bandwidth_g: 1.0,
            bandwidth_w: 0.15,
            smoothing: 1e-3,
            tolerance: 0.05,
        }
    }
}

/// Linear map from a preference to a target vector return, `R ≈ Bᵀ ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnPredictor {
    pub pref_dim: usize,
    pub return_dim: usize,
    /// Row-major `pref_dim × return_dim`.
    pub coefficients: Vec<f64>,
}

impl ReturnPredictor {
    pub fn predict(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.return_dim];
        for (i, wi) in w.iter().enumerate().take(self.pref_dim) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += wi * self.coefficients[i * self.return_dim + j];
            }
        }
        out
    }
}

/// `a` is dominated by `b` once `b` is shrunk by `tol` of its magnitude.
fn dominated_with_tolerance(a: &[f64], b: &[f64], tol: f64) -> bool {
    let shrunk: Vec<f64> = b.iter().map(|x| x - tol * x.abs()).collect();
    shrunk.iter().zip(a).all(|(x, y)| x >= y) && shrunk.iter().zip(a).any(|(x, y)| x > y)
}

/// Least-squares fit of trajectory returns on behavioral labels, using only
/// trajectories that no other trajectory dominates after shrinking by `tolerance`.
pub fn fit_return_predictor(ds: &OfflineDataset, tolerance: f64) -> Result<ReturnPredictor> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if !ds.is_labeled() {
        return Err(Error::MissingLabels);
    }
    if !(0.0..1.0).contains(&tolerance) {
        return Err(Error::invalid(format!("tolerance {tolerance} not in [0, 1)")));
    }
    let returns: Vec<&[f64]> = ds.trajectories.iter().map(|t| t.return_vector()).collect();
    let kept: Vec<usize> = (0..returns.len())
        .filter(|&i| {
            !(0..returns.len()).any(|j| j != i && dominated_with_tolerance(returns[i], returns[j], tolerance))
        })
        .collect();
    let labels: Vec<&[f64]> = kept
        .iter()
        .map(|&i| ds.trajectories[i].label().map(|p| p.as_slice()))
        .collect::<Result<_>>()?;
    let mut distinct: Vec<&[f64]> = Vec::new();
    for l in &labels {
        if !distinct.iter().any(|d| l1_distance(d, l) < 1e-12) {
            distinct.push(l);
        }
    }
    if distinct.len() < 2 {
        return Err(Error::RankDeficient(format!(
            "{} distinct preference(s) among undominated trajectories",
            distinct.len()
        )));
    }
    let (p, n) = (ds.label_dim(), ds.n_unconstrained);
    let x = DMatrix::from_fn(kept.len(), p, |r, c| labels[r][c]);
    let y = DMatrix::from_fn(kept.len(), n, |r, c| returns[kept[r]][c]);
    let b = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let coefficients: Vec<f64> = (0..p).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| b[(r, c)]).collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::RankDeficient("non-finite coefficients".into()));
    }
    Ok(ReturnPredictor {
        pref_dim: p,
        return_dim: n,
        coefficients,
    })
}

/// One distinct `(return-to-go, label, action)` tuple with its multiplicity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub g: Vec<f64>,
    pub w: Vec<f64>,
    pub a: usize,
    pub count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnConditionedModel {
    pub n_states: usize,
    pub n_actions: usize,
    pub dim: usize,
    pub bandwidth_g: f64,
    pub bandwidth_w: f64,
    pub smoothing: f64,
    /// Entries grouped by state.
    pub index: Vec<Vec<IndexEntry>>,
    pub predictor: ReturnPredictor,
}

pub fn train_return_conditioned(
    ds: &OfflineDataset,
    n_states: usize,
    n_actions: usize,
    config: &ReturnConditionedConfig,
) -> Result<ReturnConditionedModel> {
    if ds.is_empty() || ds.n_transitions() == 0 {
        return Err(Error::Empty("dataset"));
    }
    if !ds.is_labeled() {
        return Err(Error::MissingLabels);
    }
    if ds.n_constrained > 0 {
        return Err(Error::invalid(
            "constrained dataset must be augmented before training",
        ));
    }
    if !(config.bandwidth_g > 0.0 && config.bandwidth_w > 0.0 && config.smoothing > 0.0) {
        return Err(Error::invalid("bandwidths and smoothing must be positive"));
    }
    let predictor = fit_return_predictor(ds, config.tolerance)?;
    let mut index: Vec<Vec<IndexEntry>> = vec![Vec::new(); n_states];
    for traj in &ds.trajectories {
        let label = traj.label()?.as_slice();
        let mut g = traj.return_vector().to_vec();
        for t in traj.transitions() {
            if t.s >= n_states {
                return Err(Error::OutOfRange {
                    what: "state",
                    id: t.s,
                    limit: n_states,
                });
            }
            if t.a >= n_actions {
                return Err(Error::OutOfRange {
                    what: "action",
                    id: t.a,
                    limit: n_actions,
                });
            }
            let bucket = &mut index[t.s];
            match bucket.iter_mut().find(|e| e.a == t.a && e.g == g && e.w == label) {
                Some(e) => e.count += 1.0,
                None => bucket.push(IndexEntry {
                    g: g.clone(),
                    w: label.to_vec(),
                    a: t.a,
                    count: 1.0,
                }),
            }
            for (gi, r) in g.iter_mut().zip(&t.r) {
                *gi -= r;
            }
        }
    }
    Ok(ReturnConditionedModel {
        n_states,
        n_actions,
        dim: ds.n_unconstrained,
        bandwidth_g: config.bandwidth_g,
        bandwidth_w: config.bandwidth_w,
        smoothing: config.smoothing,
        index,
        predictor,
    })
}

impl ReturnConditionedModel {
    /// `π(·|s, g, ω)` written into `out`.
    pub fn action_probs(&self, s: usize, g: &[f64], w: &[f64], out: &mut [f64]) {
        out.fill(self.smoothing);
        let (bg2, bw2) = (self.bandwidth_g.powi(2), self.bandwidth_w.powi(2));
        for e in &self.index[s] {
            let dg: f64 = e.g.iter().zip(g).map(|(x, y)| (x - y) * (x - y)).sum();
            let dw = l1_distance(&e.w, w);
            out[e.a] += e.count * (-dg / bg2 - dw * dw / bw2).exp();
        }
        let z: f64 = out.iter().sum();
        for o in out.iter_mut() {
            *o /= z;
        }
    }
}
