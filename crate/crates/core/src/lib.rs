//! Offline preference-distribution adaptation for constrained multi-objective MDPs.
//!
//! A preference-conditioned policy family is trained offline on trajectories from
//! preference-varying behavior policies. At deployment a handful of demonstrations
//! is used to fit a Gaussian distribution over the (possibly cost-augmented)
//! preference simplex, from which a target preference and adapted policy are read
//! off. Constrained objectives are folded into the preference by augmenting the
//! reward with negated costs, with a CVaR-conservative read-out of the cost weights.
//!
//! The crate is organized as:
//!
//! - [`domain`]: preference vectors, datasets, demonstrations and the preference prior.
//! - [`env`]: tabular CMO-MDPs, exact dynamic-programming oracles and data generation.
//! - [`learner`]: preference-conditioned offline learners over a simplex lattice.
//! - [`adapt`]: the adaptation engine (objective, score-function optimizer, CVaR read-out).
//! - [`eval`]: utility / hypervolume metrics and the target-set evaluation driver.
//! - [`baseline`]: behavior cloning with demonstration fine-tuning.

pub mod adapt;
pub mod baseline;
pub mod domain;
pub mod env;
pub mod error;
pub mod eval;
pub mod learner;

pub use error::{Error, Result};
