use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Weights over objectives lying on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    /// Wraps weights that are already on the simplex.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("preference vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!(
                "preference weights must be finite and nonnegative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "preference weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Uniform weights over `dim` objectives.
    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Linear scalarization `w·r`.
    pub fn scalarize(&self, values: &[f64]) -> f64 {
        dot(&self.0, values)
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        l1_distance(&self.0, other)
    }
}

impl std::ops::Index<usize> for PreferenceVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for PreferenceVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PreferenceVector::new(v)
    }
}

impl From<PreferenceVector> for Vec<f64> {
    fn from(p: PreferenceVector) -> Self {
        p.0
    }
}

/// Clamps negative components to zero and rescales to unit L1 norm.
pub fn normalize_preference(raw: &[f64]) -> Result<PreferenceVector> {
    if raw.is_empty() {
        return Err(Error::Empty("preference vector"));
    }
    if raw.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("preference contains NaN"));
    }
    let clamped: Vec<f64> = raw.iter().map(|x| x.max(0.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::DegeneratePreference);
    }
    Ok(PreferenceVector(clamped.into_iter().map(|x| x / sum).collect()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Euclidean projection of `v` onto `{w : lo <= w <= hi, sum(w) = 1}`.
///
/// The feasible set must be nonempty (`sum(lo) <= 1 <= sum(hi)`); the shift is found
/// by bisection on the monotone map `tau -> sum(clamp(v - tau, lo, hi))`.
pub fn project_to_box_simplex(v: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let total = |tau: f64| -> f64 {
        v.iter()
            .zip(lo.iter().zip(hi))
            .map(|(x, (l, h))| (x - tau).clamp(*l, *h))
            .sum()
    };
    let spread = v.iter().map(|x| x.abs()).fold(1.0, f64::max) + 2.0;
    let (mut a, mut b) = (-spread, spread);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if total(mid) > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let tau = 0.5 * (a + b);
    let mut out: Vec<f64> = v
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| (x - tau).clamp(*l, *h))
        .collect();
    // bisection leaves ~1e-16 slack; push it into a coordinate with room
    let sum: f64 = out.iter().sum();
    let resid = 1.0 - sum;
    if resid != 0.0 {
        if let Some(i) = (0..out.len()).find(|&i| {
            let next = out[i] + resid;
            next >= lo[i] && next <= hi[i]
        }) {
            out[i] += resid;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_preference(&[2.0, 2.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(normalize_preference(&[0.6, -0.2]).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(
            normalize_preference(&[0.0, 0.0]),
            Err(Error::DegeneratePreference)
        ));
        assert!(matches!(
            normalize_preference(&[-1.0, -3.0]),
            Err(Error::DegeneratePreference)
        ));
    }

    #[test]
    fn new_rejects_off_simplex() {
        assert!(PreferenceVector::new(vec![0.5, 0.6]).is_err());
        assert!(PreferenceVector::new(vec![1.1, -0.1]).is_err());
        assert!(PreferenceVector::new(vec![]).is_err());
        assert!(PreferenceVector::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn serde_validates() {
        let p: PreferenceVector = serde_json::from_str("[0.3,0.7]").unwrap();
        assert_eq!(p.as_slice(), &[0.3, 0.7]);
        assert!(serde_json::from_str::<PreferenceVector>("[0.3,0.3]").is_err());
    }

    #[test]
    fn projection_respects_box() {
        let p = project_to_box_simplex(&[0.2, 0.8], &[0.5, 0.0], &[1.0, 0.5]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let inside = project_to_box_simplex(&[0.7, 0.3], &[0.5, 0.0], &[1.0, 0.5]);
        assert!((inside[0] - 0.7).abs() < 1e-12);
        let p3 = project_to_box_simplex(&[0.0, 0.0, 1.0], &[0.1, 0.1, 0.0], &[0.8, 0.8, 0.3]);
        assert!((p3.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p3[2] <= 0.3 + 1e-12 && p3[0] >= 0.1 - 1e-12);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in prop::collection::vec(-1.0f64..10.0, 1..6)) {
            prop_assume!(raw.iter().any(|x| *x > 1e-6));
            let once = normalize_preference(&raw).unwrap();
            let twice = normalize_preference(once.as_slice()).unwrap();
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((once.as_slice().iter().sum::<f64>() - 1.0).abs() < SIMPLEX_TOL);
            prop_assert!(once.as_slice().iter().all(|w| *w >= 0.0));
        }
    }
}
