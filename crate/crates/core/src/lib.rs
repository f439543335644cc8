//! Nonmyopic multiclass active search with diminishing-returns utilities.
//!
//! The library provides:
//!
//! - a concave per-class reward family and the utility it induces
//!   ([`rewards`]);
//! - an incremental k-NN posterior model with pseudocount priors and
//!   optimistic bounds for pruning ([`model`]);
//! - batch expected-utility estimators (exact enumeration, Monte Carlo, the
//!   Jensen upper bound) and a lazy greedy batch builder ([`batch`]);
//! - the policy suite: DAS (budget-aware lookahead with branch-and-bound
//!   pruning), ENS, one-step, round-robin baselines, and random
//!   ([`policy`]);
//! - problem generators (unit-square toy, the clump/secret-set hardness
//!   family with a scripted oracle policy, a generic dataset loader)
//!   ([`problems`]);
//! - a seeded, reproducible experiment harness with paired t-test reporting
//!   and an approximation-quality benchmark ([`harness`]).

pub mod batch;
pub mod error;
pub mod graph;
pub mod harness;
pub mod model;
pub mod observed;
pub mod policy;
pub mod problems;
pub mod rewards;

pub use batch::{
    collapse_pool, exact_batch_expectation, greedy_batch, greedy_batch_naive, jensen_bound,
    mc_batch_expectation, Batch, BatchMember, CandidatePool, PoolSlot,
    DEFAULT_ENUMERATION_LIMIT,
};
pub use error::{Error, Result};
pub use graph::{knn_from_features, NeighborGraph};
pub use model::{PosteriorModel, PriorVector, UpdateToken};
pub use observed::{ClassCounts, LabelId, ObservedSet};
pub use rewards::{marginal_gain, utility, CustomReward, RewardFamily, RewardKind};

/// Formats a float with 17 significant digits, enough to round-trip `f64`
/// exactly through text output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
