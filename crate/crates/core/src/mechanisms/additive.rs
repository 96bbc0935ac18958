//! The additive mechanism: release a size-`k` candidate subset with
//! probability affine in the subset's total score, then debias it.
//!
//! For a scored vote `v` and subset `S`,
//!
//! `Pr[S|v] = ((sum_{j∈S} v_j − w_min^k)/(w_max^k − w_min^k)·(e^ε − 1) + 1) / Φ`
//!
//! and the released view is `ṽ_j = a_k·[j∈S] − b_k`.

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::voting::{PrivateView, Ranking, ScoreVector, ScoredVote};

/// Largest candidate count for which subsets are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Subset size, estimator coefficients and normalizer for one `(w, ε, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditiveParams {
    pub subset_size: usize,
    pub a_k: f64,
    pub b_k: f64,
    pub w_max_k: f64,
    pub w_min_k: f64,
    pub phi: f64,
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn additive_params(w: &ScoreVector, epsilon: f64, k: usize) -> Result<AdditiveParams> {
    super::check_epsilon(epsilon)?;
    let d = w.dim();
    if k == 0 || k >= d {
        return Err(invalid(format!(
            "subset size must satisfy 1 <= k < d, got k={k}, d={d}"
        )));
    }
    let ws = w.weights();
    let w_max_k: f64 = ws[..k].iter().sum();
    let w_min_k: f64 = ws[d - k..].iter().sum();
    if w_max_k <= w_min_k {
        return Err(Error::DegenerateRule(format!(
            "'{}' gives every {k}-subset the same total score",
            w.rule_name()
        )));
    }
    let total = w.total();
    let (df, kf) = (d as f64, k as f64);
    let e = epsilon.exp();
    let em1 = epsilon.exp_m1();
    let spread = w_max_k - w_min_k;
    let phi = binomial(d, k) * (kf / df * em1 * total - e * w_min_k + w_max_k) / spread;
    let coef = (df - 1.0) / ((df - kf) * em1);
    let a_k = (total * em1 - df / kf * e * w_min_k + df / kf * w_max_k) * coef;
    let b_k = ((kf - 1.0) * em1 / (df - 1.0) * total - e * w_min_k + w_max_k) * coef;
    Ok(AdditiveParams {
        subset_size: k,
        a_k,
        b_k,
        w_max_k,
        w_min_k,
        phi,
    })
}

/// Per-rank presence weights `z_j`; the probability of a rank subset `T` is
/// `sum_{j∈T} z_j / Φ`.
pub fn presence_weights(w: &ScoreVector, epsilon: f64, params: &AdditiveParams) -> Vec<f64> {
    let k = params.subset_size as f64;
    let em1 = epsilon.exp_m1();
    let spread = params.w_max_k - params.w_min_k;
    w.weights()
        .iter()
        .map(|wj| (wj - params.w_min_k / k) / spread * em1 + 1.0 / k)
        .collect()
}

/// Enumerates every `k`-subset of candidates with its release probability.
///
/// Subsets are listed as sorted 0-based candidate indices in lexicographic order.
pub fn additive_probabilities(v: &ScoredVote, params: &AdditiveParams, epsilon: f64) -> Result<Vec<(Vec<usize>, f64)>> {
    let d = v.scores().len();
    if d > MAX_ENUMERATION_DIM {
        return Err(Error::DomainTooLarge(format!(
            "{d} candidates exceeds the enumeration limit of {MAX_ENUMERATION_DIM}"
        )));
    }
    let k = params.subset_size;
    if k == 0 || k >= d {
        return Err(invalid(format!("subset size {k} invalid for {d} candidates")));
    }
    let em1 = epsilon.exp_m1();
    let spread = params.w_max_k - params.w_min_k;
    Ok((0..d)
        .combinations(k)
        .map(|s| {
            let score: f64 = s.iter().map(|&j| v.scores()[j]).sum();
            let p = (score - params.w_min_k) / spread * em1 / params.phi + 1.0 / params.phi;
            (s, p)
        })
        .collect())
}

fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    let mut last = None;
    for (j, &p) in weights.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = Some(j);
        r -= p;
        if r < 0.0 {
            return Some(j);
        }
    }
    last
}

/// Draws `k` of the positions `0..d` with `Pr[T] ∝ sum_{j∈T} z_j`.
///
/// The smallest selected position `j*` is drawn first with probability
/// proportional to `C(d−j−1, k−1)·(z_j + (k−1)/(d−j−1)·sum_{i>j} z_i)`, the
/// total weight of all subsets whose minimum is `j`. Conditioned on `j*`, the
/// remaining `k−1` positions are a subset of `j*+1..d` with probability
/// proportional to `z_{j*} + sum_{i∈T'} z_i`, which is the same problem with
/// weights `z_i + z_{j*}/(k−1)`. Runs in `O(d·k)`.
///
/// Individual `z_j` may be negative provided every `k`-subset has a
/// non-negative total, which is what the mechanism's weights guarantee.
pub fn additive_select<R: Rng + ?Sized>(d: usize, k: usize, z: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    if z.len() != d {
        return Err(invalid(format!("{} weights for {d} positions", z.len())));
    }
    if k > d {
        return Err(invalid(format!("cannot select {k} of {d} positions")));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(invalid("position weights must be finite"));
    }
    let mut selected = Vec::with_capacity(k);
    let mut weights = z.to_vec();
    let mut offset = 0;
    let mut remaining = k;
    let mut group = vec![0.0; d];
    while remaining > 0 {
        let m = weights.len();
        if remaining == m {
            selected.extend(offset..offset + m);
            break;
        }
        let groups = m - remaining + 1;
        let r = (remaining - 1) as f64;
        // walk j downwards so the suffix sum and C(m-1-j, remaining-1) update in O(1)
        let mut suffix = weights[groups..].iter().sum::<f64>();
        let mut binom = 1.0;
        for j in (0..groups).rev() {
            let tail = (m - 1 - j) as f64;
            if j + 1 < groups {
                binom *= tail / (tail - r);
            }
            let spread = if remaining > 1 { r / tail * suffix } else { 0.0 };
            group[j] = (binom * (weights[j] + spread)).max(0.0);
            suffix += weights[j];
        }
        let pick = draw_categorical(&group[..groups], rng)
            .ok_or_else(|| invalid("position weights give every subset zero probability"))?;
        selected.push(offset + pick);
        let carry = if remaining > 1 { weights[pick] / r } else { 0.0 };
        weights = weights[pick + 1..].iter().map(|x| x + carry).collect();
        offset += pick + 1;
        remaining -= 1;
    }
    Ok(selected)
}

#[derive(Debug, Clone)]
pub struct AdditiveMechanism {
    params: AdditiveParams,
    presence: Vec<f64>,
}

impl AdditiveMechanism {
    pub fn new(w: &ScoreVector, epsilon: f64, k: usize) -> Result<Self> {
        let params = additive_params(w, epsilon, k)?;
        let presence = presence_weights(w, epsilon, &params);
        Ok(Self { params, presence })
    }

    pub fn params(&self) -> &AdditiveParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.presence.len()
    }

    /// Draws the released subset of candidates.
    pub fn select_candidates<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R) -> Vec<usize> {
        let d = self.dim();
        additive_select(d, self.params.subset_size, &self.presence, rng)
            .expect("presence weights are valid by construction")
            .into_iter()
            .map(|pos| ranking.candidate_at(pos))
            .collect()
    }

    /// The debiased view of a released subset.
    pub fn view_of_subset(&self, subset: &[usize]) -> PrivateView {
        let mut out = vec![-self.params.b_k; self.dim()];
        for &c in subset {
            out[c] = self.params.a_k - self.params.b_k;
        }
        PrivateView::from_vec(out)
    }

    pub(crate) fn randomize_into<R: Rng + ?Sized>(&self, ranking: &Ranking, rng: &mut R, out: &mut [f64]) {
        let subset = self.select_candidates(ranking, rng);
        out.fill(-self.params.b_k);
        for c in subset {
            out[c] = self.params.a_k - self.params.b_k;
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

pub fn additive_mechanism<R: Rng + ?Sized>(
    ranking: &Ranking,
    epsilon: f64,
    w: &ScoreVector,
    k: usize,
    rng: &mut R,
) -> Result<PrivateView> {
    AdditiveMechanism::new(w, epsilon, k)?.randomize(ranking, rng)
}
