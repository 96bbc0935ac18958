//! Locally differentially private aggregation of positional votes.
//!
//! Each voter randomizes their own scored vote with one of three ε-LDP
//! mechanisms ([`mechanisms`]); an untrusted aggregator averages the private
//! views ([`voting::aggregate`]).
//!
//! Closed-form error and manipulation-risk bounds live in [`bounds`]. The
//! seeded simulation driver in [`harness`] can inject the fraud views built by
//! [`adversary`], and [`oracle`] checks the mechanisms by exhaustive
//! enumeration on small candidate sets.

pub mod adversary;
pub mod bounds;
mod error;
pub mod harness;
pub mod mechanisms;
pub mod oracle;
pub mod rng;
pub mod voting;

pub use error::{Error, Result};
pub use mechanisms::{MechanismKind, Randomizer};
pub use rng::RngHandle;
pub use voting::{
    aggregate, builtin_score_vector, l1_distance, sensitivity, to_scored_vote, usefulness_metrics, AggregateResult,
    MetricsReport, PrivateView, Ranking, Rule, ScoreVector, ScoredVote,
};
