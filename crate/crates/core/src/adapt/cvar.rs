use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::domain::GaussianPreferenceDistribution;
use crate::{Error, Result};

/// Upper-tail CVaR read-out of a preference distribution.
///
/// The first `n` components keep their mean; each of the following `k` cost
/// components becomes `μ + σ φ(Φ⁻¹(1 − α)) / α`, the mean of its upper α-tail.
pub fn conservative_estimate(dist: &GaussianPreferenceDistribution, alpha: f64, n: usize, k: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 1]")));
    }
    if dist.dim() != n + k {
        return Err(Error::DimensionMismatch {
            expected: n + k,
            got: dist.dim(),
        });
    }
    let mut b = dist.mean.clone();
    if alpha < 1.0 {
        let z = Normal::standard();
        let factor = z.pdf(z.inverse_cdf(1.0 - alpha)) / alpha;
        for i in n..n + k {
            b[i] += dist.stddev[i] * factor;
        }
    }
    Ok(b)
}
