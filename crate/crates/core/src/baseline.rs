//! Behavior cloning with demonstration fine-tuning.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{DemonstrationSet, OfflineDataset};
use crate::env::{Policy, StepContext};
use crate::{Error, Result};

pub const BC_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_FINETUNE_LR: f64 = 0.01;
pub const DEFAULT_FINETUNE_STEPS: usize = 1000;
/// Per-component gradient clip during fine-tuning.
pub const GRAD_CLIP: f64 = 10.0;

/// Softmax policy over per-state action logits, `logits[s * A + a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularStochasticPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub logits: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyDocument {
    format_version: u32,
    kind: String,
    #[serde(flatten)]
    policy: TabularStochasticPolicy,
}

impl TabularStochasticPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularStochasticPolicy {
            n_states,
            n_actions,
            logits: vec![0.0; n_states * n_actions],
        }
    }

    pub fn probs_into(&self, s: usize, out: &mut [f64]) {
        let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, l) in out.iter_mut().zip(row) {
            *o = (l - m).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }

    pub fn probs(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        self.probs_into(s, &mut out);
        out
    }

    /// Sum of `log π(a|s)` over the demonstrations.
    pub fn log_likelihood(&self, demos: &DemonstrationSet) -> f64 {
        demos.transitions.iter().map(|t| self.probs(t.s)[t.a].ln()).sum()
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::OutOfRange {
                what: "state",
                id: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::OutOfRange {
                what: "action",
                id: a,
                limit: self.n_actions,
            });
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(
            out,
            &PolicyDocument {
                format_version: BC_FORMAT_VERSION,
                kind: "behavior_cloning".into(),
                policy: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let doc: PolicyDocument = serde_json::from_reader(input)?;
        if doc.format_version != BC_FORMAT_VERSION || doc.kind != "behavior_cloning" {
            return Err(Error::Format(format!(
                "unsupported policy document (kind {}, version {})",
                doc.kind, doc.format_version
            )));
        }
        let p = doc.policy;
        if p.logits.len() != p.n_states * p.n_actions || p.logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Format("malformed logits table".into()));
        }
        Ok(p)
    }
}

impl Policy for TabularStochasticPolicy {
    fn action_probs(&self, ctx: &StepContext<'_>, out: &mut [f64]) {
        self.probs_into(ctx.state, out);
    }
}

/// Add-one smoothed action frequencies per state, stored as log-probabilities.
pub fn bc_train(ds: &OfflineDataset, n_states: usize, n_actions: usize) -> Result<TabularStochasticPolicy> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut p = TabularStochasticPolicy::uniform(n_states, n_actions);
    let mut counts = vec![1.0; n_states * n_actions];
    for t in ds.trajectories.iter().flat_map(|t| t.transitions()) {
        p.check(t.s, t.a)?;
        counts[t.s * n_actions + t.a] += 1.0;
    }
    for s in 0..n_states {
        let row = &counts[s * n_actions..(s + 1) * n_actions];
        let total: f64 = row.iter().sum();
        for a in 0..n_actions {
            p.logits[s * n_actions + a] = (row[a] / total).ln();
        }
    }
    Ok(p)
}

/// Full-batch gradient ascent on the summed demonstration log-likelihood,
/// starting from `p`'s logits.
pub fn bc_finetune(
    p: &TabularStochasticPolicy,
    demos: &DemonstrationSet,
    lr: f64,
    steps: usize,
) -> Result<TabularStochasticPolicy> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstration set"));
    }
    let na = p.n_actions;
    // demo action counts per visited state
    let mut visits: Vec<(usize, Vec<f64>)> = Vec::new();
    for t in &demos.transitions {
        p.check(t.s, t.a)?;
        match visits.iter_mut().find(|(s, _)| *s == t.s) {
            Some((_, c)) => c[t.a] += 1.0,
            None => {
                let mut c = vec![0.0; na];
                c[t.a] = 1.0;
                visits.push((t.s, c));
            }
        }
    }
    let mut out = p.clone();
    let mut pi = vec![0.0; na];
    for _ in 0..steps {
        for (s, c) in &visits {
            out.probs_into(*s, &mut pi);
            let n: f64 = c.iter().sum();
            for a in 0..na {
                let g = (c[a] - n * pi[a]).clamp(-GRAD_CLIP, GRAD_CLIP);
                out.logits[s * na + a] += lr * g;
            }
        }
    }
    Ok(out)
}
