use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::OfflineDataset;
use crate::{Error, Result};

/// Lower bound on fitted prior standard deviations.
pub const PRIOR_STD_FLOOR: f64 = 0.05;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Diagonal Gaussian over raw (unnormalized) preference vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPreferenceDistribution {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl GaussianPreferenceDistribution {
    pub fn new(mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        if mean.len() != stddev.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: stddev.len(),
            });
        }
        if mean.is_empty() {
            return Err(Error::Empty("distribution"));
        }
        if stddev.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("standard deviations must be finite and > 0"));
        }
        Ok(Self { mean, stddev })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.stddev)
            .zip(x)
            .map(|((m, s), x)| {
                let z = (x - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * LN_2PI
            })
            .sum()
    }

    /// Closed-form differential entropy `Σ (½ ln(2πe) + ln σᵢ)`.
    pub fn entropy(&self) -> f64 {
        self.stddev
            .iter()
            .map(|s| 0.5 * (LN_2PI + 1.0) + s.ln())
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.stddev)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect()
    }
}

/// Gaussian fit to the trajectory-level behavioral preferences of a dataset
/// (population standard deviation, floored at [`PRIOR_STD_FLOOR`]).
pub fn fit_preference_prior(ds: &OfflineDataset) -> Result<GaussianPreferenceDistribution> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let labels = ds
        .trajectories
        .iter()
        .map(|t| t.label().map(|p| p.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let dim = labels[0].len();
    let n = labels.len() as f64;
    let mut mean = vec![0.0; dim];
    for l in &labels {
        for (m, x) in mean.iter_mut().zip(*l) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for l in &labels {
        for ((v, x), m) in var.iter_mut().zip(*l).zip(&mean) {
            *v += (x - m) * (x - m) / n;
        }
    }
    let stddev = var.into_iter().map(|v| v.sqrt().max(PRIOR_STD_FLOOR)).collect();
    GaussianPreferenceDistribution::new(mean, stddev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PreferenceVector, Trajectory, Transition};
    use proptest::prelude::*;

    fn labeled(prefs: &[Vec<f64>]) -> OfflineDataset {
        let ts = prefs
            .iter()
            .map(|p| {
                let mut t = Trajectory::new(vec![Transition {
                    s: 0,
                    a: 0,
                    s2: 0,
                    r: p.clone(),
                    c: vec![],
                }]);
                t.pref = Some(PreferenceVector::new(p.clone()).unwrap());
                t
            })
            .collect();
        OfflineDataset::new("t", prefs[0].len(), 0, ts).unwrap()
    }

    #[test]
    fn prior_examples() {
        let ds = labeled(&[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.7, 0.3]]);
        let p = fit_preference_prior(&ds).unwrap();
        assert!((p.mean[0] - 0.5).abs() < 1e-12 && (p.mean[1] - 0.5).abs() < 1e-12);
        assert!((p.stddev[0] - 0.163_299_316).abs() < 1e-6);
        assert!((p.stddev[1] - 0.163_299_316).abs() < 1e-6);

        let p = fit_preference_prior(&labeled(&[vec![1.0, 0.0]])).unwrap();
        assert_eq!(p.mean, vec![1.0, 0.0]);
        assert_eq!(p.stddev, vec![0.05, 0.05]);

        let empty = OfflineDataset::new("t", 2, 0, vec![]).unwrap();
        assert!(fit_preference_prior(&empty).is_err());
    }

    #[test]
    fn unlabeled_rejected() {
        let t = Trajectory::new(vec![Transition {
            s: 0,
            a: 0,
            s2: 0,
            r: vec![1.0],
            c: vec![],
        }]);
        let ds = OfflineDataset::new("t", 1, 0, vec![t]).unwrap();
        assert!(matches!(fit_preference_prior(&ds), Err(Error::MissingLabels)));
    }

    #[test]
    fn entropy_doubling_identity() {
        let d = GaussianPreferenceDistribution::new(vec![0.1, 0.2, 0.3], vec![0.2, 0.1, 0.5]).unwrap();
        let d2 = GaussianPreferenceDistribution::new(d.mean.clone(), d.stddev.iter().map(|s| 2.0 * s).collect()).unwrap();
        assert!((d2.entropy() - d.entropy() - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prior_mean_in_hull(ws in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let prefs: Vec<Vec<f64>> = ws.iter().map(|w| vec![*w, 1.0 - w]).collect();
            let p = fit_preference_prior(&labeled(&prefs)).unwrap();
            for d in 0..2 {
                let lo = prefs.iter().map(|x| x[d]).fold(f64::INFINITY, f64::min);
                let hi = prefs.iter().map(|x| x[d]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(p.mean[d] >= lo - 1e-12 && p.mean[d] <= hi + 1e-12);
                prop_assert!(p.stddev[d] >= PRIOR_STD_FLOOR);
            }
        }
    }
}
