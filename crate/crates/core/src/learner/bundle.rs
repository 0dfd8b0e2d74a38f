//! Trained policy family and per-preference query views.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::lattice::SimplexLattice;
use super::regularized::{regularized_policy, RegularizedModel};
use super::return_conditioned::ReturnConditionedModel;
use crate::domain::project_to_box_simplex;
use crate::env::{Policy, StepContext};
use crate::{Error, Result};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
/// Floor on action probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyBundle {
    Regularized(RegularizedModel),
    ReturnConditioned(ReturnConditionedModel),
}

#[derive(Serialize, Deserialize)]
struct BundleDocument {
    format_version: u32,
    #[serde(flatten)]
    bundle: PolicyBundle,
}

impl PolicyBundle {
    pub fn kind(&self) -> &'static str {
        match self {
            PolicyBundle::Regularized(_) => "regularized",
            PolicyBundle::ReturnConditioned(_) => "return_conditioned",
        }
    }

    /// Preference dimension the bundle is conditioned on.
    pub fn dim(&self) -> usize {
        match self {
            PolicyBundle::Regularized(m) => m.dim(),
            PolicyBundle::ReturnConditioned(m) => m.dim,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            PolicyBundle::Regularized(m) => m.n_states,
            PolicyBundle::ReturnConditioned(m) => m.n_states,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            PolicyBundle::Regularized(m) => m.n_actions,
            PolicyBundle::ReturnConditioned(m) => m.n_actions,
        }
    }

    /// Whether the bundle exposes value functions (and hence a TD residual).
    pub fn has_values(&self) -> bool {
        matches!(self, PolicyBundle::Regularized(_))
    }

    /// Fixes the preference for repeated queries.
    pub fn view(&self, w: &[f64]) -> Result<BundleView<'_>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("preference contains non-finite weights"));
        }
        match self {
            PolicyBundle::Regularized(m) => {
                let clamped = project_to_box_simplex(w, &m.support_lo, &m.support_hi);
                let weights = m.lattice.weights(&clamped);
                Ok(BundleView::Regularized {
                    model: m,
                    w: clamped,
                    weights,
                })
            }
            PolicyBundle::ReturnConditioned(m) => Ok(BundleView::ReturnConditioned {
                model: m,
                w: w.to_vec(),
                g0: m.predictor.predict(w),
            }),
        }
    }

    /// `log π(a|s, ω)` (floored); return-conditioned bundles use `g` or the
    /// predicted initial return when `g` is absent.
    pub fn policy_logprob(&self, s: usize, a: usize, w: &[f64], g: Option<&[f64]>) -> Result<f64> {
        self.check_ids(s, Some(a))?;
        self.view(w)?.logprob(s, a, g)
    }

    pub fn action_probs(&self, s: usize, w: &[f64], g: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_ids(s, None)?;
        let mut out = vec![0.0; self.n_actions()];
        self.view(w)?.action_probs(s, g, &mut out);
        Ok(out)
    }

    pub fn q_value(&self, s: usize, a: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.check_ids(s, Some(a))?;
        let mut out = vec![0.0; self.dim()];
        self.view(w)?.q_into(s, a, &mut out)?;
        Ok(out)
    }

    pub fn v_value(&self, s: usize, w: &[f64]) -> Result<Vec<f64>> {
        self.check_ids(s, None)?;
        let mut out = vec![0.0; self.dim()];
        self.view(w)?.v_into(s, &mut out)?;
        Ok(out)
    }

    pub fn check_ids(&self, s: usize, a: Option<usize>) -> Result<()> {
        if s >= self.n_states() {
            return Err(Error::OutOfRange {
                what: "state",
                id: s,
                limit: self.n_states(),
            });
        }
        if let Some(a) = a {
            if a >= self.n_actions() {
                return Err(Error::OutOfRange {
                    what: "action",
                    id: a,
                    limit: self.n_actions(),
                });
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(
            out,
            &BundleDocument {
                format_version: BUNDLE_FORMAT_VERSION,
                bundle: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let doc: BundleDocument = serde_json::from_reader(input)?;
        if doc.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported bundle format version {}",
                doc.format_version
            )));
        }
        Ok(doc.bundle)
    }
}

/// A bundle with the preference fixed; state and action ids are trusted.
#[derive(Clone, Debug)]
pub enum BundleView<'a> {
    Regularized {
        model: &'a RegularizedModel,
        /// Query preference after projection onto the training support.
        w: Vec<f64>,
        weights: Vec<(usize, f64)>,
    },
    ReturnConditioned {
        model: &'a ReturnConditionedModel,
        w: Vec<f64>,
        g0: Vec<f64>,
    },
}

impl BundleView<'_> {
    /// Predicted initial return-to-go (return-conditioned only).
    pub fn initial_return(&self) -> Option<&[f64]> {
        match self {
            BundleView::ReturnConditioned { g0, .. } => Some(g0),
            BundleView::Regularized { .. } => None,
        }
    }

    pub fn action_probs(&self, s: usize, g: Option<&[f64]>, out: &mut [f64]) {
        match self {
            BundleView::Regularized { model, w, weights } => {
                let (na, d) = (model.n_actions, model.dim());
                let mut logits = vec![0.0; na];
                let mut q = vec![0.0; na * d];
                SimplexLattice::interpolate_into(weights, &model.behavior_logits, model.n_states * na, s * na, &mut logits);
                SimplexLattice::interpolate_into(weights, &model.q, model.n_states * na * d, s * na * d, &mut q);
                regularized_policy(&logits, &q, w, model.temperature, out);
            }
            BundleView::ReturnConditioned { model, w, g0 } => {
                model.action_probs(s, g.unwrap_or(g0), w, out);
            }
        }
    }

    pub fn logprob(&self, s: usize, a: usize, g: Option<&[f64]>) -> Result<f64> {
        let mut out = vec![0.0; self.n_actions()];
        self.action_probs(s, g, &mut out);
        Ok(out[a].max(PROB_FLOOR).ln())
    }

    fn n_actions(&self) -> usize {
        match self {
            BundleView::Regularized { model, .. } => model.n_actions,
            BundleView::ReturnConditioned { model, .. } => model.n_actions,
        }
    }

    pub fn q_into(&self, s: usize, a: usize, out: &mut [f64]) -> Result<()> {
        match self {
            BundleView::Regularized { model, weights, .. } => {
                let d = model.dim();
                let stride = model.n_states * model.n_actions * d;
                SimplexLattice::interpolate_into(weights, &model.q, stride, (s * model.n_actions + a) * d, out);
                Ok(())
            }
            BundleView::ReturnConditioned { .. } => Err(unsupported("q_value")),
        }
    }

    pub fn v_into(&self, s: usize, out: &mut [f64]) -> Result<()> {
        match self {
            BundleView::Regularized { model, weights, .. } => {
                let d = model.dim();
                SimplexLattice::interpolate_into(weights, &model.v, model.n_states * d, s * d, out);
                Ok(())
            }
            BundleView::ReturnConditioned { .. } => Err(unsupported("v_value")),
        }
    }
}

fn unsupported(op: &'static str) -> Error {
    Error::Unsupported {
        op,
        kind: "return_conditioned",
    }
}

/// A bundle queried at one fixed preference, usable as an environment policy.
///
/// Return-conditioned bundles track the return-to-go `g0 − reward so far`;
/// trailing cost-augmented components track `g0 + cost so far`.
pub struct AdaptedPolicy<'a> {
    view: BundleView<'a>,
}

impl<'a> AdaptedPolicy<'a> {
    pub fn new(bundle: &'a PolicyBundle, w: &[f64]) -> Result<Self> {
        Ok(AdaptedPolicy { view: bundle.view(w)? })
    }

    pub fn view(&self) -> &BundleView<'a> {
        &self.view
    }
}

impl Policy for AdaptedPolicy<'_> {
    fn action_probs(&self, ctx: &StepContext<'_>, out: &mut [f64]) {
        match self.view.initial_return() {
            Some(g0) => {
                let n = ctx.reward_so_far.len();
                let g: Vec<f64> = g0
                    .iter()
                    .enumerate()
                    .map(|(i, x)| match ctx.reward_so_far.get(i) {
                        Some(r) => x - r,
                        None => x + ctx.cost_so_far.get(i - n).copied().unwrap_or(0.0),
                    })
                    .collect();
                self.view.action_probs(ctx.state, Some(&g), out);
            }
            None => self.view.action_probs(ctx.state, None, out),
        }
    }
}
