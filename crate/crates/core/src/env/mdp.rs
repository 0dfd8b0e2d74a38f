use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A finite-horizon tabular constrained multi-objective MDP.
///
/// Tables are flattened row-major: `transition[(s * A + a) * S + s2]`,
/// `reward[(s * A + a) * N + i]`, `cost[(s * A + a) * K + j]`. States in
/// `terminal` end an episode on arrival; they must be absorbing with zero
/// reward and cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmoMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_rewards: usize,
    pub n_costs: usize,
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
    pub cost: Vec<f64>,
    pub gamma: f64,
    pub horizon: usize,
    pub initial_state: usize,
    #[serde(default)]
    pub terminal: Vec<usize>,
}

impl CmoMdpSpec {
    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.n_states, self.n_actions);
        if s == 0 || a == 0 {
            return Err(Error::invalid("MDP needs at least one state and action"));
        }
        let expect = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Format(format!("{name} table has {got} entries, expected {want}")))
            }
        };
        expect("transition", self.transition.len(), s * a * s)?;
        expect("reward", self.reward.len(), s * a * self.n_rewards)?;
        expect("cost", self.cost.len(), s * a * self.n_costs)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma {} not in (0, 1)", self.gamma)));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if self.initial_state >= s {
            return Err(Error::OutOfRange {
                what: "initial state",
                id: self.initial_state,
                limit: s,
            });
        }
        for row in self.transition.chunks(s) {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Format("transition row is not a distribution".into()));
            }
        }
        if self.cost.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::Format("costs must be nonnegative".into()));
        }
        for &t in &self.terminal {
            if t >= s {
                return Err(Error::OutOfRange {
                    what: "terminal state",
                    id: t,
                    limit: s,
                });
            }
            for act in 0..a {
                if self.p(t, act)[t] != 1.0
                    || self.r(t, act).iter().any(|x| *x != 0.0)
                    || self.c(t, act).iter().any(|x| *x != 0.0)
                {
                    return Err(Error::Format(format!(
                        "terminal state {t} is not absorbing with zero payoff"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let base = (s * self.n_actions + a) * n;
        &self.transition[base..base + n]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_rewards;
        let base = (s * self.n_actions + a) * n;
        &self.reward[base..base + n]
    }

    #[inline]
    pub fn c(&self, s: usize, a: usize) -> &[f64] {
        let k = self.n_costs;
        let base = (s * self.n_actions + a) * k;
        &self.cost[base..base + k]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal.contains(&s)
    }

    /// The same MDP with reward `[r, -c]` and no costs.
    pub fn augmented(&self) -> CmoMdpSpec {
        let (n, k) = (self.n_rewards, self.n_costs);
        let mut reward = Vec::with_capacity(self.n_states * self.n_actions * (n + k));
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                reward.extend_from_slice(self.r(s, a));
                reward.extend(self.c(s, a).iter().map(|c| -c));
            }
        }
        CmoMdpSpec {
            n_rewards: n + k,
            n_costs: 0,
            reward,
            cost: Vec::new(),
            ..self.clone()
        }
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::OutOfRange {
                what: "state",
                id: s,
                limit: self.n_states,
            });
        }
        Ok(())
    }
}

/// What a policy may condition on at one step.
pub struct StepContext<'a> {
    pub t: usize,
    pub state: usize,
    /// Undiscounted reward and cost accumulated so far in the episode.
    pub reward_so_far: &'a [f64],
    pub cost_so_far: &'a [f64],
}

/// A (possibly time- or history-dependent) stochastic policy.
pub trait Policy: Sync {
    /// Writes `π(·|ctx)` into `out` (length = number of actions).
    fn action_probs(&self, ctx: &StepContext<'_>, out: &mut [f64]);
}

/// Deterministic time-indexed policy, `actions[t * S + s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPolicy {
    pub n_states: usize,
    pub horizon: usize,
    pub actions: Vec<usize>,
}

impl TimedPolicy {
    pub fn action(&self, t: usize, s: usize) -> usize {
        self.actions[t.min(self.horizon - 1) * self.n_states + s]
    }
}

impl Policy for TimedPolicy {
    fn action_probs(&self, ctx: &StepContext<'_>, out: &mut [f64]) {
        out.fill(0.0);
        out[self.action(ctx.t, ctx.state)] = 1.0;
    }
}

/// Takes a uniformly random action with probability `epsilon`.
pub struct EpsilonGreedy<'a, P: Policy> {
    pub inner: &'a P,
    pub epsilon: f64,
}

impl<P: Policy> Policy for EpsilonGreedy<'_, P> {
    fn action_probs(&self, ctx: &StepContext<'_>, out: &mut [f64]) {
        self.inner.action_probs(ctx, out);
        let u = self.epsilon / out.len() as f64;
        for p in out.iter_mut() {
            *p = (1.0 - self.epsilon) * *p + u;
        }
    }
}
