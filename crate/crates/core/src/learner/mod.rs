//! Preference-conditioned offline learners.
//!
//! Two families share the [`PolicyBundle`] interface: a behavior-regularized
//! soft policy iteration over a simplex lattice of preferences (which also
//! exposes vector `Q` and `V`), and a kernel-weighted return-conditioned
//! action model.

mod bundle;
mod lattice;
mod regularized;
mod return_conditioned;

pub use bundle::{AdaptedPolicy, BundleView, PolicyBundle, BUNDLE_FORMAT_VERSION, PROB_FLOOR};
pub use lattice::SimplexLattice;
pub use regularized::{train_regularized, RegularizedConfig, RegularizedModel};
pub use return_conditioned::{
    fit_return_predictor, train_return_conditioned, IndexEntry, ReturnConditionedConfig, ReturnConditionedModel,
    ReturnPredictor,
};
