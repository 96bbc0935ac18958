//! The three ε-LDP randomizers. Each turns a ranking into an unbiased
//! [`PrivateView`] of its scored vote.

mod additive;
mod laplace;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use additive::{
    additive_mechanism, additive_params, additive_probabilities, additive_select, presence_weights, AdditiveMechanism,
    AdditiveParams, MAX_ENUMERATION_DIM,
};
pub use laplace::{laplace_mechanism, laplace_noise, laplace_quantile, LaplaceMechanism};
pub use sampling::{optimal_sampling_params, weighted_sampling_mechanism, SamplingMechanism, SamplingParams};

use crate::error::{invalid, Result};
use crate::voting::{PrivateView, Ranking, ScoreVector};

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "privacy budget must be positive and finite, got {epsilon}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Laplace,
    WeightedSampling,
    Additive,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 3] = [
        MechanismKind::Laplace,
        MechanismKind::WeightedSampling,
        MechanismKind::Additive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismKind::Laplace => "laplace",
            MechanismKind::WeightedSampling => "weighted_sampling",
            MechanismKind::Additive => "additive",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "laplace" => Ok(MechanismKind::Laplace),
            "weighted_sampling" | "sampling" => Ok(MechanismKind::WeightedSampling),
            "additive" => Ok(MechanismKind::Additive),
            other => Err(invalid(format!("unknown mechanism '{other}'"))),
        }
    }
}

/// A mechanism with its parameters fixed for one `(w, ε)`.
#[derive(Debug, Clone)]
pub enum Randomizer {
    Laplace(LaplaceMechanism),
    WeightedSampling(SamplingMechanism),
    Additive(AdditiveMechanism),
}

impl Randomizer {
    /// Weighted sampling uses the variance-optimal masses; `additive_k` is the
    /// additive mechanism's subset size and is ignored by the others.
    pub fn new(kind: MechanismKind, w: &ScoreVector, epsilon: f64, additive_k: usize) -> Result<Self> {
        Ok(match kind {
            MechanismKind::Laplace => Randomizer::Laplace(LaplaceMechanism::new(w, epsilon)?),
            MechanismKind::WeightedSampling => {
                Randomizer::WeightedSampling(SamplingMechanism::new(w, epsilon, optimal_sampling_params(w)?)?)
            }
            MechanismKind::Additive => Randomizer::Additive(AdditiveMechanism::new(w, epsilon, additive_k)?),
        })
    }

    pub fn kind(&self) -> MechanismKind {
        match self {
            Randomizer::Laplace(_) => MechanismKind::Laplace,
            Randomizer::WeightedSampling(_) => MechanismKind::WeightedSampling,
            Randomizer::Additive(_) => MechanismKind::Additive,
        }
    }

    /// Writes the view into `out`, which must have one slot per candidate.
    pub fn randomize_into<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(ranking.len(), out.len());
        match self {
            Randomizer::Laplace(m) => m.randomize_into(ranking, rng, out),
            Randomizer::WeightedSampling(m) => m.randomize_into(ranking, rng, out),
            Randomizer::Additive(m) => m.randomize_into(ranking, rng, out),
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R) -> Result<PrivateView> {
        match self {
            Randomizer::Laplace(m) => m.randomize(ranking, rng),
            Randomizer::WeightedSampling(m) => m.randomize(ranking, rng),
            Randomizer::Additive(m) => m.randomize(ranking, rng),
        }
    }
}
