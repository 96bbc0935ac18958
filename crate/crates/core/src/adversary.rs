//! Attack generators.
//!
//! A data-amplification adversary submits fraudulent rankings that are then
//! randomized like honest ones. A view-disguise adversary skips the randomizer
//! and submits a crafted view from the mechanism's output domain that pushes
//! the runner-up `j2` above the leader `j1`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mechanisms::{additive_params, check_epsilon, optimal_sampling_params, MechanismKind, SamplingMechanism};
use crate::voting::{sensitivity, PrivateView, Ranking, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    DataAmplification,
    ViewDisguise,
}

impl AttackKind {
    pub const ALL: [AttackKind; 2] = [AttackKind::DataAmplification, AttackKind::ViewDisguise];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::DataAmplification => "data_amplification",
            AttackKind::ViewDisguise => "view_disguise",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "data_amplification" | "amplification" => Ok(AttackKind::DataAmplification),
            "view_disguise" | "disguise" => Ok(AttackKind::ViewDisguise),
            other => Err(invalid(format!("unknown attack kind '{other}'"))),
        }
    }
}

/// One adversary: `count` fraudulent submissions of the given kind.
///
/// For view disguise, `target_pair = (j1, j2)` names the candidate to demote and
/// the one to promote. When it is `None` the harness fills it in from the honest
/// estimate of the same trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub count: usize,
    #[serde(default)]
    pub target_pair: Option<(usize, usize)>,
}

/// Noise scale used for the Laplace disguise band `±ln(20)·s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceDisguiseScale {
    /// `s = Δ/ε`, the scale of the noise actually added.
    #[default]
    NoiseScale,
    /// `s = Δ`, ignoring the budget.
    Sensitivity,
}

impl FromStr for LaplaceDisguiseScale {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "noise_scale" | "noise" => Ok(LaplaceDisguiseScale::NoiseScale),
            "sensitivity" => Ok(LaplaceDisguiseScale::Sensitivity),
            other => Err(invalid(format!("unknown Laplace disguise scale '{other}'"))),
        }
    }
}

/// Mechanism parameters a disguised view must be consistent with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisguiseParams {
    pub additive_k: usize,
    pub laplace_scale: LaplaceDisguiseScale,
}

impl Default for DisguiseParams {
    fn default() -> Self {
        Self {
            additive_k: 1,
            laplace_scale: LaplaceDisguiseScale::NoiseScale,
        }
    }
}

/// `ln(1/(1 − 0.95))`: the two-sided 95% quantile of a unit Laplace variable.
pub fn laplace_band_quantile() -> f64 {
    20.0f64.ln()
}

/// `count` independent uniform permutations of `d` candidates.
pub fn random_fraud_votes<R: Rng + ?Sized>(count: usize, d: usize, rng: &mut R) -> Vec<Ranking> {
    (0..count)
        .map(|_| {
            let mut order: Vec<usize> = (0..d).collect();
            order.shuffle(rng);
            Ranking::new(order).expect("shuffled identity is a permutation")
        })
        .collect()
}

/// The single view a disguise adversary submits.
pub fn disguised_view(
    kind: MechanismKind,
    w: &ScoreVector,
    epsilon: f64,
    params: &DisguiseParams,
    j1: usize,
    j2: usize,
) -> Result<PrivateView> {
    check_epsilon(epsilon)?;
    let d = w.dim();
    if j1 == j2 || j1 >= d || j2 >= d {
        return Err(invalid(format!(
            "target pair ({j1}, {j2}) must be two distinct candidates below {d}"
        )));
    }
    let values = match kind {
        MechanismKind::Laplace => {
            let s = match params.laplace_scale {
                LaplaceDisguiseScale::NoiseScale => sensitivity(w) / epsilon,
                LaplaceDisguiseScale::Sensitivity => sensitivity(w),
            };
            let q = laplace_band_quantile();
            let mut v = vec![w.median_weight(); d];
            v[j2] = q * s + w.max();
            v[j1] = -q * s + w.min();
            v
        }
        MechanismKind::WeightedSampling => {
            let mech = SamplingMechanism::new(w, epsilon, optimal_sampling_params(w)?)?;
            // the gap between a set and an unset coordinate is proportional to |gain|
            let gain = (0..d)
                .filter_map(|r| mech.gain(r))
                .fold(0.0f64, |best, g| if g.abs() > best.abs() { g } else { best });
            // a positive gain favours the set bit, a negative one the unset bit
            let favoured = gain > 0.0;
            (0..d)
                .map(|j| mech.coordinate_value(gain, (j == j2) == favoured))
                .collect()
        }
        MechanismKind::Additive => {
            let p = additive_params(w, epsilon, params.additive_k)?;
            let mut subset = vec![j2];
            subset.extend((0..d).filter(|&j| j != j1 && j != j2).take(p.subset_size - 1));
            (0..d)
                .map(|j| if subset.contains(&j) { p.a_k - p.b_k } else { -p.b_k })
                .collect()
        }
    };
    PrivateView::new(values)
}

/// `count` copies of [`disguised_view`].
pub fn disguised_views(
    kind: MechanismKind,
    w: &ScoreVector,
    epsilon: f64,
    params: &DisguiseParams,
    j1: usize,
    j2: usize,
    count: usize,
) -> Result<Vec<PrivateView>> {
    let view = disguised_view(kind, w, epsilon, params, j1, j2)?;
    Ok(vec![view; count])
}

/// Honest views followed by the attack views.
pub fn apply_attack(honest: Vec<PrivateView>, attack: Vec<PrivateView>) -> Result<Vec<PrivateView>> {
    let d = honest.first().or(attack.first()).map(PrivateView::len);
    if let Some(d) = d {
        if let Some(bad) = honest.iter().chain(&attack).find(|v| v.len() != d) {
            return Err(invalid(format!(
                "view of length {} mixed with views of length {d}",
                bad.len()
            )));
        }
    }
    let mut all = honest;
    all.extend(attack);
    Ok(all)
}
