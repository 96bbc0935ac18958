//! Weighted rank sampling followed by binary randomized response.
//!
//! A rank `j*` is drawn from fixed masses `m` (independent of the vote), the
//! candidate holding that rank becomes a one-hot vector, every bit is flipped
//! with probability `1/(sqrt(e^ε)+1)`, and the bits are rescaled so that the
//! result is an unbiased estimate of the scored vote:
//!
//! `ṽ_j = ((sqrt(e^ε)+1)·B̃_j − 1)/(sqrt(e^ε) − 1) · (w_{j*} − c)/m_{j*} + c`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::voting::{PrivateView, Ranking, ScoreVector};

const MASS_SUM_TOLERANCE: f64 = 1e-12;

/// Sampling masses over rank positions plus the intercept `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    masses: Vec<f64>,
    intercept: f64,
}

impl SamplingParams {
    pub fn new(masses: Vec<f64>, intercept: f64) -> Result<Self> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(invalid("sampling masses must be finite and non-negative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(invalid(format!("sampling masses sum to {total}, expected 1")));
        }
        if !intercept.is_finite() {
            return Err(invalid("intercept must be finite"));
        }
        Ok(Self { masses, intercept })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// `sum_j |w_j − c|`; the normalizer of the optimal masses.
    pub fn omega(&self, w: &ScoreVector) -> f64 {
        w.weights().iter().map(|wj| (wj - self.intercept).abs()).sum()
    }

    /// Per-rank gain `(w_j − c)/m_j`, `None` for ranks that are never sampled.
    ///
    /// Fails when a zero-mass rank carries a nonzero `w_j − c`, since the
    /// estimator could then never recover that rank's score.
    pub fn gains(&self, w: &ScoreVector) -> Result<Vec<Option<f64>>> {
        if self.masses.len() != w.dim() {
            return Err(invalid(format!(
                "{} sampling masses for {} candidates",
                self.masses.len(),
                w.dim()
            )));
        }
        w.weights()
            .iter()
            .zip(&self.masses)
            .enumerate()
            .map(|(j, (&wj, &m))| {
                if m > 0.0 {
                    Ok(Some((wj - self.intercept) / m))
                } else if wj == self.intercept {
                    Ok(None)
                } else {
                    Err(invalid(format!(
                        "rank {} has zero mass but weight {wj} differs from intercept {}",
                        j + 1,
                        self.intercept
                    )))
                }
            })
            .collect()
    }
}

/// Masses minimizing the estimator variance: `c = w_{ceil(d/2)}`,
/// `m_j = |w_j − c| / sum_j' |w_j' − c|`.
pub fn optimal_sampling_params(w: &ScoreVector) -> Result<SamplingParams> {
    if w.is_constant() {
        return Err(Error::DegenerateRule(format!(
            "'{}' has constant weights; sampling masses are undefined",
            w.rule_name()
        )));
    }
    let c = w.median_weight();
    let omega = w.omega();
    let masses = w.weights().iter().map(|wj| (wj - c).abs() / omega).collect();
    SamplingParams::new(masses, c)
}

#[derive(Debug, Clone)]
pub struct SamplingMechanism {
    params: SamplingParams,
    gains: Vec<Option<f64>>,
    sqrt_exp_eps: f64,
    flip_probability: f64,
}

impl SamplingMechanism {
    pub fn new(w: &ScoreVector, epsilon: f64, params: SamplingParams) -> Result<Self> {
        super::check_epsilon(epsilon)?;
        let gains = params.gains(w)?;
        let sqrt_exp_eps = (epsilon / 2.0).exp();
        Ok(Self {
            params,
            gains,
            sqrt_exp_eps,
            flip_probability: 1.0 / (sqrt_exp_eps + 1.0),
        })
    }

    pub fn params(&self) -> &SamplingParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.gains.len()
    }

    /// `(w_{j*} − c)/m_{j*}` for a sampled rank.
    pub fn gain(&self, rank: usize) -> Option<f64> {
        self.gains[rank]
    }

    /// Output value of one coordinate for a given gain and randomized bit.
    pub fn coordinate_value(&self, gain: f64, bit: bool) -> f64 {
        let s = self.sqrt_exp_eps;
        let scale = if bit { s / (s - 1.0) } else { -1.0 / (s - 1.0) };
        scale * gain + self.params.intercept
    }

    /// Probability that a bit is flipped by randomized response.
    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }

    /// Draws a rank by walking the cumulative masses; zero-mass ranks are never returned.
    pub fn select_rank<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut r: f64 = rng.random();
        let mut last = 0;
        for (j, &m) in self.params.masses.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            last = j;
            r -= m;
            if r < 0.0 {
                return j;
            }
        }
        // cumulative rounding left r marginally above zero
        last
    }

    pub(crate) fn randomize_into<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R, out: &mut [f64]) {
        let rank = self.select_rank(rng);
        let hot = ranking.candidate_at(rank);
        let gain = self.gains[rank].expect("selected rank has positive mass");
        let hi = self.coordinate_value(gain, true);
        let lo = self.coordinate_value(gain, false);
        for (j, o) in out.iter_mut().enumerate() {
            let flip = rng.random::<f64>() < self.flip_probability;
            *o = if (j == hot) != flip { hi } else { lo };
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R) -> Result<PrivateView> {
        if ranking.len() != self.dim() {
            return Err(invalid("ranking length does not match the score vector"));
        }
        let mut out = vec![0.0; self.dim()];
        self.randomize_into(ranking, rng, &mut out);
        Ok(PrivateView::from_vec(out))
    }
}

pub fn weighted_sampling_mechanism<R: Rng + ?Sized>(
    ranking: &Ranking,
    epsilon: f64,
    w: &ScoreVector,
    params: &SamplingParams,
    rng: &mut R,
) -> Result<PrivateView> {
    SamplingMechanism::new(w, epsilon, params.clone())?.randomize(ranking, rng)
}
