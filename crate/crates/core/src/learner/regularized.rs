//! Behavior-regularized soft policy iteration at every lattice node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::SimplexLattice;
use crate::domain::{l1_distance, OfflineDataset};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizedConfig {
    /// Lattice divisions per simplex edge (nodes per edge minus one).
    pub divisions: usize,
    pub bandwidth: f64,
    pub temperature: f64,
    pub sweeps: usize,
    pub gamma: f64,
}

impl Default for RegularizedConfig {
    fn default() -> Self {
        RegularizedConfig {
            divisions: 10,
            bandwidth: 0.15,
            temperature: 0.1,
            sweeps: 200,
            gamma: 0.99,
        }
    }
}

/// Per-node tables of the regularized learner, node-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedModel {
    pub lattice: SimplexLattice,
    pub n_states: usize,
    pub n_actions: usize,
    pub temperature: f64,
    pub bandwidth: f64,
    pub gamma: f64,
    /// `log π̂_b(a|s)`, `[node][s][a]`.
    pub behavior_logits: Vec<f64>,
    /// Vector `Q(s, a)`, `[node][s][a][i]`.
    pub q: Vec<f64>,
    /// Vector `V(s) = Σ_a π(a|s) Q(s, a)`, `[node][s][i]`.
    pub v: Vec<f64>,
    /// Componentwise range of the training labels; queries are projected into it.
    pub support_lo: Vec<f64>,
    pub support_hi: Vec<f64>,
}

/// Dataset statistics for one `(s, a)` pair under a kernel weighting.
struct SaStats {
    weight: f64,
    reward: Vec<f64>,
    next: Vec<(usize, f64)>,
}

/// Regularized policy `π ∝ exp(logit_b + w·Q / τ)` written into `out`.
pub(crate) fn regularized_policy(logits_b: &[f64], q: &[f64], w: &[f64], temperature: f64, out: &mut [f64]) {
    let d = w.len();
    for (a, o) in out.iter_mut().enumerate() {
        let qa = &q[a * d..(a + 1) * d];
        let score: f64 = w.iter().zip(qa).map(|(x, y)| x * y).sum();
        *o = logits_b[a] + score / temperature;
    }
    let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for o in out.iter_mut() {
        *o = (*o - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// Trains behavior-policy estimates and soft Q tables at every lattice node.
///
/// Each node weights trajectories by `exp(-‖label − node‖₁² / bandwidth²)`;
/// `(s, a)` pairs never seen in the data keep `Q = 0`.
pub fn train_regularized(
    ds: &OfflineDataset,
    n_states: usize,
    n_actions: usize,
    config: &RegularizedConfig,
) -> Result<RegularizedModel> {
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
    if !(config.temperature > 0.0) || !(config.bandwidth > 0.0) {
        return Err(Error::invalid("temperature and bandwidth must be positive"));
    }
    if !(config.gamma > 0.0 && config.gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {} not in (0, 1)", config.gamma)));
    }
    let d = ds.n_unconstrained;
    for t in ds.trajectories.iter().flat_map(|t| t.transitions()) {
        if t.s >= n_states || t.s2 >= n_states {
            return Err(Error::OutOfRange {
                what: "state",
                id: t.s.max(t.s2),
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
    }
    let lattice = SimplexLattice::new(d, config.divisions)?;
    let labels: Vec<&[f64]> = ds
        .trajectories
        .iter()
        .map(|t| t.label().map(|p| p.as_slice()))
        .collect::<Result<_>>()?;
    let mut support_lo = vec![f64::INFINITY; d];
    let mut support_hi = vec![f64::NEG_INFINITY; d];
    for l in &labels {
        for i in 0..d {
            support_lo[i] = support_lo[i].min(l[i]);
            support_hi[i] = support_hi[i].max(l[i]);
        }
    }

    let per_node: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..lattice.len())
        .into_par_iter()
        .map(|k| train_node(ds, &labels, &lattice.node(k), n_states, n_actions, config))
        .collect();
    let (mut behavior_logits, mut q, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (l, qq, vv) in per_node {
        behavior_logits.extend(l);
        q.extend(qq);
        v.extend(vv);
    }
    Ok(RegularizedModel {
        lattice,
        n_states,
        n_actions,
        temperature: config.temperature,
        bandwidth: config.bandwidth,
        gamma: config.gamma,
        behavior_logits,
        q,
        v,
        support_lo,
        support_hi,
    })
}

fn train_node(
    ds: &OfflineDataset,
    labels: &[&[f64]],
    node: &[f64],
    ns: usize,
    na: usize,
    config: &RegularizedConfig,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = node.len();
    let bw2 = config.bandwidth * config.bandwidth;
    let mut counts = vec![0.0; ns * na];
    let mut stats: Vec<SaStats> = (0..ns * na)
        .map(|_| SaStats {
            weight: 0.0,
            reward: vec![0.0; d],
            next: Vec::new(),
        })
        .collect();
    for (traj, label) in ds.trajectories.iter().zip(labels) {
        let dist = l1_distance(label, node);
        let kappa = (-dist * dist / bw2).exp();
        if kappa == 0.0 {
            continue;
        }
        for t in traj.transitions() {
            let sa = t.s * na + t.a;
            counts[sa] += kappa;
            let st = &mut stats[sa];
            st.weight += kappa;
            for (acc, r) in st.reward.iter_mut().zip(&t.r) {
                *acc += kappa * r;
            }
            match st.next.iter_mut().find(|(s2, _)| *s2 == t.s2) {
                Some(e) => e.1 += kappa,
                None => st.next.push((t.s2, kappa)),
            }
        }
    }
    for st in &mut stats {
        if st.weight > 0.0 {
            for r in &mut st.reward {
                *r /= st.weight;
            }
            for e in &mut st.next {
                e.1 /= st.weight;
            }
        }
    }
    let mut logits = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &counts[s * na..(s + 1) * na];
        let total: f64 = row.iter().sum::<f64>() + na as f64;
        for a in 0..na {
            logits[s * na + a] = ((row[a] + 1.0) / total).ln();
        }
    }

    let mut q = vec![0.0; ns * na * d];
    let mut v = vec![0.0; ns * d];
    let mut pi = vec![0.0; na];
    let update_v = |q: &[f64], v: &mut [f64], pi: &mut [f64]| {
        for s in 0..ns {
            regularized_policy(
                &logits[s * na..(s + 1) * na],
                &q[s * na * d..(s + 1) * na * d],
                node,
                config.temperature,
                pi,
            );
            let vs = &mut v[s * d..(s + 1) * d];
            vs.fill(0.0);
            for a in 0..na {
                for i in 0..d {
                    vs[i] += pi[a] * q[(s * na + a) * d + i];
                }
            }
        }
    };
    for _ in 0..config.sweeps {
        update_v(&q, &mut v, &mut pi);
        for (sa, st) in stats.iter().enumerate() {
            if st.weight == 0.0 {
                continue;
            }
            let qsa = &mut q[sa * d..(sa + 1) * d];
            qsa.copy_from_slice(&st.reward);
            for &(s2, p) in &st.next {
                for i in 0..d {
                    qsa[i] += config.gamma * p * v[s2 * d + i];
                }
            }
        }
    }
    update_v(&q, &mut v, &mut pi);
    (logits, q, v)
}

impl RegularizedModel {
    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    fn node_stride_logits(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Regularized policy at node `k` and state `s`.
    pub fn node_policy(&self, k: usize, s: usize) -> Vec<f64> {
        let (na, d) = (self.n_actions, self.dim());
        let lb = k * self.node_stride_logits() + s * na;
        let qb = (k * self.node_stride_logits() + s * na) * d;
        let mut out = vec![0.0; na];
        regularized_policy(
            &self.behavior_logits[lb..lb + na],
            &self.q[qb..qb + na * d],
            &self.lattice.node(k),
            self.temperature,
            &mut out,
        );
        out
    }

    /// Behavior-policy estimate at node `k` and state `s`.
    pub fn node_behavior(&self, k: usize, s: usize) -> Vec<f64> {
        let lb = k * self.node_stride_logits() + s * self.n_actions;
        self.behavior_logits[lb..lb + self.n_actions].iter().map(|l| l.exp()).collect()
    }

    pub fn node_q(&self, k: usize, s: usize, a: usize) -> &[f64] {
        let d = self.dim();
        let b = ((k * self.n_states + s) * self.n_actions + a) * d;
        &self.q[b..b + d]
    }

    pub fn node_v(&self, k: usize, s: usize) -> &[f64] {
        let d = self.dim();
        let b = (k * self.n_states + s) * d;
        &self.v[b..b + d]
    }

    /// Same tables with a different temperature (node `V` is recomputed).
    pub fn with_temperature(&self, temperature: f64) -> RegularizedModel {
        let mut out = self.clone();
        out.temperature = temperature;
        let (ns, na, d) = (self.n_states, self.n_actions, self.dim());
        for k in 0..self.lattice.len() {
            for s in 0..ns {
                let pi = out.node_policy(k, s);
                let b = (k * ns + s) * d;
                for i in 0..d {
                    out.v[b + i] = (0..na).map(|a| pi[a] * self.node_q(k, s, a)[i]).sum();
                }
            }
        }
        out
    }
}
