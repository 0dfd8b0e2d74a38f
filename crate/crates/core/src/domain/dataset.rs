use serde::{Deserialize, Serialize};

use super::preference::{normalize_preference, PreferenceVector};
use crate::{Error, Result};

pub type RewardVector = Vec<f64>;
pub type CostVector = Vec<f64>;

/// One environment step `(s, a, s', r, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s2: usize,
    pub r: RewardVector,
    pub c: CostVector,
}

impl Transition {
    /// The same step with reward `[r, -c]` and no costs.
    pub fn augmented(&self) -> Transition {
        let mut r = self.r.clone();
        r.extend(self.c.iter().map(|c| -c));
        Transition {
            s: self.s,
            a: self.a,
            s2: self.s2,
            r,
            c: Vec::new(),
        }
    }
}

/// An episode with its cumulative reward and cost vectors.
///
/// `pref` is the trajectory-level behavioral preference label shared by every
/// transition; `src` records the preference of the behavior policy that produced
/// the episode, when known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrajectoryRecord", into = "TrajectoryRecord")]
pub struct Trajectory {
    transitions: Vec<Transition>,
    return_vector: RewardVector,
    cost_return: CostVector,
    pub pref: Option<PreferenceVector>,
    pub src: Option<PreferenceVector>,
}

#[derive(Clone, Serialize, Deserialize)]
struct TrajectoryRecord {
    transitions: Vec<Transition>,
    pref: Option<PreferenceVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    src: Option<PreferenceVector>,
}

impl From<TrajectoryRecord> for Trajectory {
    fn from(rec: TrajectoryRecord) -> Self {
        let mut t = Trajectory::new(rec.transitions);
        t.pref = rec.pref;
        t.src = rec.src;
        t
    }
}

impl From<Trajectory> for TrajectoryRecord {
    fn from(t: Trajectory) -> Self {
        TrajectoryRecord {
            transitions: t.transitions,
            pref: t.pref,
            src: t.src,
        }
    }
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Self {
        let n = transitions.first().map_or(0, |t| t.r.len());
        let k = transitions.first().map_or(0, |t| t.c.len());
        let mut ret = vec![0.0; n];
        let mut cost = vec![0.0; k];
        for t in &transitions {
            for (acc, x) in ret.iter_mut().zip(&t.r) {
                *acc += x;
            }
            for (acc, x) in cost.iter_mut().zip(&t.c) {
                *acc += x;
            }
        }
        Trajectory {
            transitions,
            return_vector: ret,
            cost_return: cost,
            pref: None,
            src: None,
        }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn return_vector(&self) -> &[f64] {
        &self.return_vector
    }

    pub fn cost_return(&self) -> &[f64] {
        &self.cost_return
    }

    /// Behavioral preference label, or an error if the trajectory is unlabeled.
    pub fn label(&self) -> Result<&PreferenceVector> {
        self.pref.as_ref().ok_or(Error::MissingLabels)
    }
}

/// Offline dataset of labeled trajectories.
///
/// After [`augment_dataset`] the rewards carry `n_augmented_costs` trailing
/// negated-cost components and `n_constrained` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineDataset {
    pub env_id: String,
    pub n_unconstrained: usize,
    pub n_constrained: usize,
    pub augmented: bool,
    pub n_augmented_costs: usize,
    pub trajectories: Vec<Trajectory>,
}

impl OfflineDataset {
    pub fn new(
        env_id: impl Into<String>,
        n_unconstrained: usize,
        n_constrained: usize,
        trajectories: Vec<Trajectory>,
    ) -> Result<Self> {
        let ds = OfflineDataset {
            env_id: env_id.into(),
            n_unconstrained,
            n_constrained,
            augmented: false,
            n_augmented_costs: 0,
            trajectories,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.augmented && self.n_constrained != 0 {
            return Err(Error::Format(
                "augmented dataset must not carry constrained objectives".into(),
            ));
        }
        for traj in &self.trajectories {
            for t in traj.transitions() {
                if t.r.len() != self.n_unconstrained {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_unconstrained,
                        got: t.r.len(),
                    });
                }
                if t.c.len() != self.n_constrained {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_constrained,
                        got: t.c.len(),
                    });
                }
                if t.c.iter().any(|c| *c < 0.0) {
                    return Err(Error::Format("negative cost component".into()));
                }
            }
            if let Some(p) = &traj.pref {
                if p.dim() != self.label_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.label_dim(),
                        got: p.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Dimension of behavioral-preference labels (`N + K`).
    pub fn label_dim(&self) -> usize {
        self.n_unconstrained + self.n_constrained
    }

    /// Number of original (non-cost) reward objectives.
    pub fn n_reward_objectives(&self) -> usize {
        self.n_unconstrained - self.n_augmented_costs
    }

    /// Componentwise maximum cost return over trajectories.
    pub fn cost_max(&self) -> CostVector {
        let mut out: Vec<f64> = vec![0.0; self.n_constrained];
        for traj in &self.trajectories {
            for (m, c) in out.iter_mut().zip(traj.cost_return()) {
                *m = m.max(*c);
            }
        }
        out
    }

    pub fn is_labeled(&self) -> bool {
        !self.trajectories.is_empty() && self.trajectories.iter().all(|t| t.pref.is_some())
    }

    /// Labels every trajectory with its approximated behavioral preference using
    /// the dataset-wide cost maximum.
    pub fn label(&mut self) -> Result<()> {
        let cmax = self.cost_max();
        for traj in &mut self.trajectories {
            let p = approx_behavioral_preference(traj, &cmax)?;
            traj.pref = Some(p);
        }
        Ok(())
    }

    /// Copy with costs removed (`K = 0`) and labels recomputed from rewards alone.
    pub fn without_constraints(&self) -> Result<OfflineDataset> {
        if self.augmented {
            return Err(Error::AlreadyAugmented);
        }
        let trajectories = self
            .trajectories
            .iter()
            .map(|traj| {
                let ts = traj
                    .transitions()
                    .iter()
                    .map(|t| Transition {
                        c: Vec::new(),
                        ..t.clone()
                    })
                    .collect();
                let mut out = Trajectory::new(ts);
                out.src = traj.src.clone();
                out
            })
            .collect();
        let mut ds = OfflineDataset {
            n_constrained: 0,
            trajectories,
            ..self.clone()
        };
        ds.label()?;
        Ok(ds)
    }
}

/// `U(τ) / ‖U(τ)‖₁` with `U(τ) = [R₁..R_N, C₁^max − C₁ .. C_K^max − C_K]`.
pub fn approx_behavioral_preference(
    traj: &Trajectory,
    cost_max: &[f64],
) -> Result<PreferenceVector> {
    if cost_max.len() != traj.cost_return().len() {
        return Err(Error::DimensionMismatch {
            expected: traj.cost_return().len(),
            got: cost_max.len(),
        });
    }
    let mut u: Vec<f64> = traj.return_vector().to_vec();
    for (cm, c) in cost_max.iter().zip(traj.cost_return()) {
        if cm < c {
            return Err(Error::invalid(format!(
                "cost maximum {cm} below trajectory cost {c}"
            )));
        }
        u.push(cm - c);
    }
    normalize_preference(&u)
}

/// Converts a constrained dataset to an unconstrained one with reward `[r, -c]`.
pub fn augment_dataset(ds: &OfflineDataset) -> Result<OfflineDataset> {
    if ds.augmented {
        return Err(Error::AlreadyAugmented);
    }
    if ds.n_constrained == 0 {
        return Err(Error::NothingToAugment);
    }
    let cmax = ds.cost_max();
    let trajectories = ds
        .trajectories
        .iter()
        .map(|traj| {
            let label = approx_behavioral_preference(traj, &cmax)?;
            let mut out = Trajectory::new(traj.transitions().iter().map(Transition::augmented).collect());
            out.pref = Some(label);
            out.src = traj.src.clone();
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OfflineDataset {
        env_id: ds.env_id.clone(),
        n_unconstrained: ds.n_unconstrained + ds.n_constrained,
        n_constrained: 0,
        augmented: true,
        n_augmented_costs: ds.n_constrained,
        trajectories,
    })
}

/// What a demonstration set is drawn for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Target {
    Preference { preference: PreferenceVector },
    Threshold { threshold: CostVector },
    Both {
        preference: PreferenceVector,
        threshold: CostVector,
    },
}

impl Target {
    pub fn preference(&self) -> Option<&PreferenceVector> {
        match self {
            Target::Preference { preference } | Target::Both { preference, .. } => Some(preference),
            Target::Threshold { .. } => None,
        }
    }

    pub fn threshold(&self) -> Option<&[f64]> {
        match self {
            Target::Threshold { threshold } | Target::Both { threshold, .. } => Some(threshold),
            Target::Preference { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.threshold() {
            if b.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::invalid("threshold components must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.4}"))
                .collect::<Vec<_>>()
                .join("/")
        };
        match self {
            Target::Preference { preference } => format!("w={}", fmt(preference.as_slice())),
            Target::Threshold { threshold } => format!("b={}", fmt(threshold)),
            Target::Both {
                preference,
                threshold,
            } => format!("w={};b={}", fmt(preference.as_slice()), fmt(threshold)),
        }
    }
}
