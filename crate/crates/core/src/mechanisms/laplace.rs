//! Per-coordinate Laplace noise calibrated to the rule's sensitivity.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::voting::{sensitivity, to_scored_vote, PrivateView, Ranking, ScoreVector, ScoredVote};

/// Draws `Lap(scale)` by inverting the CDF at one uniform draw.
///
/// A draw of exactly `u = 0.5` maps to zero noise.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let mut u: f64 = rng.random();
    while u == 0.0 {
        u = rng.random();
    }
    laplace_quantile(scale, u)
}

/// Inverse CDF of the zero-centred Laplace distribution.
pub fn laplace_quantile(scale: f64, u: f64) -> f64 {
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

#[derive(Debug, Clone)]
pub struct LaplaceMechanism {
    weights: ScoreVector,
    scale: f64,
}

impl LaplaceMechanism {
    pub fn new(w: &ScoreVector, epsilon: f64) -> Result<Self> {
        super::check_epsilon(epsilon)?;
        Ok(Self {
            weights: w.clone(),
            scale: sensitivity(w) / epsilon,
        })
    }

    /// Noise scale `Δ/ε`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn randomize_vote<R: Rng + ?Sized>(&self, v: &ScoredVote, rng: &mut R) -> Result<PrivateView> {
        if v.scores().len() != self.weights.dim() {
            return Err(invalid("scored vote length does not match the score vector"));
        }
        let values = v.scores().iter().map(|&s| s + laplace_noise(self.scale, rng)).collect();
        Ok(PrivateView::from_vec(values))
    }

    pub(crate) fn randomize_into<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R, out: &mut [f64]) {
        for (&cand, &wj) in ranking.order().iter().zip(self.weights.weights()) {
            out[cand] = wj;
        }
        for o in out.iter_mut() {
            *o += laplace_noise(self.scale, rng);
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R) -> Result<PrivateView> {
        let v = to_scored_vote(ranking, &self.weights)?;
        self.randomize_vote(&v, rng)
    }
}

/// `ṽ_j = v_j + Lap(Δ/ε)` independently for every candidate.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    v: &ScoredVote,
    epsilon: f64,
    w: &ScoreVector,
    rng: &mut R,
) -> Result<PrivateView> {
    LaplaceMechanism::new(w, epsilon)?.randomize_vote(v, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;
    use crate::voting::{builtin_score_vector, Rule};
    use rand::RngCore;

    /// Every `f64` drawn from this source is exactly 0.5.
    struct MedianRng;

    impl RngCore for MedianRng {
        fn next_u32(&mut self) -> u32 {
            1 << 31
        }
        fn next_u64(&mut self) -> u64 {
            1 << 63
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0x80)
        }
    }

    fn borda5() -> ScoreVector {
        builtin_score_vector(Rule::Borda, 5, None).unwrap()
    }

    #[test]
    fn median_draws_add_no_noise() {
        let w = borda5();
        let v = to_scored_vote(&Ranking::from_labels(&[3, 2, 1, 4, 5]).unwrap(), &w).unwrap();
        assert_eq!(MedianRng.random::<f64>(), 0.5);
        let out = laplace_mechanism(&v, 1.0, &w, &mut MedianRng).unwrap();
        assert_eq!(out.values(), v.scores());
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let w = borda5();
        let v = to_scored_vote(&Ranking::identity(5), &w).unwrap();
        let mut rng = RngHandle::from_seed(1);
        assert!(laplace_mechanism(&v, 0.0, &w, &mut rng).is_err());
        assert!(laplace_mechanism(&v, -1.0, &w, &mut rng).is_err());
        assert!(laplace_mechanism(&v, f64::NAN, &w, &mut rng).is_err());
    }

    #[test]
    fn quantile_is_antisymmetric() {
        for u in [0.01, 0.2, 0.4, 0.49] {
            assert!((laplace_quantile(3.0, u) + laplace_quantile(3.0, 1.0 - u)).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_match_laplace() {
        let w = borda5();
        let v = to_scored_vote(&Ranking::from_labels(&[3, 2, 1, 4, 5]).unwrap(), &w).unwrap();
        let mech = LaplaceMechanism::new(&w, 1.0).unwrap();
        assert_eq!(mech.scale(), 12.0);
        let mut rng = RngHandle::from_seed(2024);
        let draws = 1_000_000;
        let mut sum = [0.0f64; 5];
        let mut sq = [0.0f64; 5];
        for _ in 0..draws {
            let out = mech.randomize_vote(&v, &mut rng).unwrap();
            for j in 0..5 {
                let e = out.values()[j] - v.scores()[j];
                sum[j] += e;
                sq[j] += e * e;
            }
        }
        let n = draws as f64;
        let band = 3.0 * (2.0f64.sqrt() * 12.0) / 1e3;
        for j in 0..5 {
            let mean = sum[j] / n;
            let var = sq[j] / n - mean * mean;
            assert!(mean.abs() < band, "coordinate {j} mean {mean}");
            assert!((var - 288.0).abs() / 288.0 < 0.02, "coordinate {j} var {var}");
        }
    }
}
