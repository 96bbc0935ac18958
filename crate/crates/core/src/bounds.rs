//! Closed-form usefulness and soundness bounds for the three mechanisms.
//!
//! Every risk is expressed per aggregated report, i.e. divided by the number
//! of voters `n`, so that risks and the empirical `E[|ṽ|₁]/n` share units.
//! The domain diameter is a property of a single view and is not divided by `n`.

use std::fmt;
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::mechanisms::{
    additive_params, check_epsilon, optimal_sampling_params, AdditiveParams, MechanismKind, SamplingParams,
};
use crate::voting::{sensitivity, PrivateView, ScoreVector};

/// A risk that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Risk {
    Finite(f64),
    Infinite,
}

impl Risk {
    pub fn value(self) -> f64 {
        match self {
            Risk::Finite(v) => v,
            Risk::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Risk::Finite(_))
    }
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Risk::Finite(v) => write!(f, "{v}"),
            Risk::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Risk {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Risk::Finite(v) => s.serialize_f64(*v),
            Risk::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Theoretical error and manipulation risks of one mechanism configuration.
///
/// `mse_bound` is `None` where no closed form exists (additive mechanism with `k > 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub mse_bound: Option<f64>,
    pub risk_mm: Risk,
    pub risk_em: f64,
    pub risk_dd: Risk,
}

fn check_voters(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("number of voters must be at least 1"));
    }
    Ok(n as f64)
}

/// `2d·Δ²/(n·ε²)`.
pub fn laplace_mse_bound(w: &ScoreVector, n: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let n = check_voters(n)?;
    let delta = sensitivity(w);
    Ok(2.0 * w.dim() as f64 * delta * delta / (n * epsilon * epsilon))
}

/// Unbounded maximum magnitude and diameter; expected magnitude
/// `(1/n)·sum_j [(Δ/ε)·exp(−|w_j|ε/Δ) + |w_j|]`.
pub fn laplace_risks(w: &ScoreVector, n: usize, epsilon: f64) -> Result<BoundReport> {
    let mse = laplace_mse_bound(w, n, epsilon)?;
    let n = n as f64;
    let scale = sensitivity(w) / epsilon;
    let magnitude: f64 = w
        .weights()
        .iter()
        .map(|wj| {
            let noise = if scale > 0.0 {
                scale * (-wj.abs() / scale).exp()
            } else {
                0.0
            };
            noise + wj.abs()
        })
        .sum();
    Ok(BoundReport {
        mse_bound: Some(mse),
        risk_mm: Risk::Infinite,
        risk_em: magnitude / n,
        risk_dd: Risk::Infinite,
    })
}

/// Expected L1 magnitude of one Laplace view of a Borda vote, summed as a
/// geometric series over the weights `d−1, …, 0`.
pub fn borda_laplace_expected_magnitude(d: usize, epsilon: f64) -> f64 {
    let df = d as f64;
    let delta = if d % 2 == 1 {
        (df * df - 1.0) / 2.0
    } else {
        df * df / 2.0
    };
    let t = epsilon / delta;
    delta / epsilon * (t.exp() - ((1.0 - df) * t).exp()) / t.exp_m1() + df * (df - 1.0) / 2.0
}

/// `1 + d·sqrt(e^ε)/(sqrt(e^ε) − 1)²`, the combined sampling and randomized-response factor.
fn sampling_factor(d: usize, epsilon: f64) -> f64 {
    let s = (epsilon / 2.0).exp();
    1.0 + d as f64 * s / ((s - 1.0) * (s - 1.0))
}

/// `(1/n)·(1 + d·sqrt(e^ε)/(sqrt(e^ε)−1)²)·sum_j (w_j − c)²/m_j`.
pub fn sampling_mse_bound(w: &ScoreVector, n: usize, epsilon: f64, params: &SamplingParams) -> Result<f64> {
    check_epsilon(epsilon)?;
    let n = check_voters(n)?;
    let gains = params.gains(w)?;
    let spread: f64 = gains
        .iter()
        .zip(params.masses())
        .zip(w.weights())
        .filter_map(|((g, m), wj)| g.map(|_| (wj - params.intercept()).powi(2) / m))
        .sum();
    Ok(sampling_factor(w.dim(), epsilon) * spread / n)
}

/// Exact mean squared error of the weighted-sampling estimator.
///
/// [`sampling_mse_bound`] is `E|ṽ − c·1|²/n`; subtracting `|v − c·1|² = sum_j (w_j − c)²`
/// gives `E|ṽ − v|²/n`, which does not depend on the vote.
pub fn sampling_exact_mse(w: &ScoreVector, n: usize, epsilon: f64, params: &SamplingParams) -> Result<f64> {
    let bound = sampling_mse_bound(w, n, epsilon, params)?;
    let c = params.intercept();
    let offset: f64 = w.weights().iter().map(|wj| (wj - c).powi(2)).sum();
    Ok(bound - offset / n as f64)
}

/// The sampling bound at the optimal parameters: `(1/n)·factor·Ω_w²`.
pub fn optimal_sampling_mse_bound(w: &ScoreVector, n: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let n = check_voters(n)?;
    let omega = w.omega();
    Ok(sampling_factor(w.dim(), epsilon) * omega * omega / n)
}

/// Risks of weighted sampling for arbitrary masses and intercept.
///
/// Only ranks with positive mass contribute, since no other rank can be drawn.
pub fn sampling_risks(w: &ScoreVector, n: usize, epsilon: f64, params: &SamplingParams) -> Result<BoundReport> {
    let mse = sampling_mse_bound(w, n, epsilon, params)?;
    let n = n as f64;
    let d = w.dim() as f64;
    let c = params.intercept();
    let s = (epsilon / 2.0).exp();
    let (hi_scale, lo_scale) = (s / (s - 1.0), -1.0 / (s - 1.0));
    let ones = (s + d - 1.0) / (s + 1.0);
    let zeros = (s * (d - 1.0) + 1.0) / (s + 1.0);

    let mut max_abs = 0.0f64;
    let mut expected = 0.0;
    let (mut g_max, mut g_min) = (f64::NEG_INFINITY, f64::INFINITY);
    for (gain, m) in params.gains(w)?.into_iter().zip(params.masses()) {
        let Some(gain) = gain else { continue };
        let t = (hi_scale * gain + c).abs();
        let f = (lo_scale * gain + c).abs();
        max_abs = max_abs.max(t).max(f);
        expected += m * (ones * t + zeros * f);
        for g in [hi_scale * gain, lo_scale * gain] {
            g_max = g_max.max(g);
            g_min = g_min.min(g);
        }
    }
    Ok(BoundReport {
        mse_bound: Some(mse),
        risk_mm: Risk::Finite(d * max_abs / n),
        risk_em: expected / n,
        risk_dd: Risk::Finite(d * (g_max - g_min)),
    })
}

/// Closed-form risks at `c = w_{ceil(d/2)}` and `m_j = |w_j − c|/Ω_w`.
///
/// The maximum magnitude and diameter assume both signs of `w_j − c` occur. For
/// rules where only one does (plurality, antiplurality) they are upper bounds on
/// the values from [`sampling_risks`].
pub fn optimal_sampling_risks(w: &ScoreVector, n: usize, epsilon: f64) -> Result<BoundReport> {
    let mse = optimal_sampling_mse_bound(w, n, epsilon)?;
    let n = n as f64;
    let d = w.dim() as f64;
    let c = w.median_weight();
    let omega = w.omega();
    let s = (epsilon / 2.0).exp();
    let t_plus = (s / (s - 1.0) * omega + c).abs();
    let t_minus = (-s / (s - 1.0) * omega + c).abs();
    let f_plus = (-1.0 / (s - 1.0) * omega + c).abs();
    let f_minus = (1.0 / (s - 1.0) * omega + c).abs();
    let mut expected = 0.0;
    for wj in w.weights() {
        let m = (wj - c).abs() / omega;
        if *wj > c {
            expected += m * ((s + d - 1.0) * t_plus + (s * (d - 1.0) + 1.0) * f_plus);
        } else if *wj < c {
            expected += m * ((s + d - 1.0) * t_minus + (s * (d - 1.0) + 1.0) * f_minus);
        }
    }
    Ok(BoundReport {
        mse_bound: Some(mse),
        risk_mm: Risk::Finite(d / n * t_plus.max(t_minus)),
        risk_em: expected / (n * (s + 1.0)),
        risk_dd: Risk::Finite(2.0 * s * d * omega / (s - 1.0)),
    })
}

/// Subset-size-one bound `[(sum ŵ)² − sum ŵ²] / (n·(e^ε − 1)²)` with
/// `ŵ_j = w_j(e^ε − 1) − e^ε·w_d + w_1`.
pub fn additive_mse_bound(w: &ScoreVector, n: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let n = check_voters(n)?;
    let em1 = epsilon.exp_m1();
    let e = epsilon.exp();
    let (first, last) = (w.max(), w.min());
    let (sum, sum_sq) = w.weights().iter().fold((0.0, 0.0), |(s, q), wj| {
        let hat = wj * em1 - e * last + first;
        (s + hat, q + hat * hat)
    });
    Ok((sum * sum - sum_sq) / (n * em1 * em1))
}

/// Every additive view has the same L1 norm, so maximum and expected magnitude coincide.
pub fn additive_risks(params: &AdditiveParams, d: usize, n: usize) -> Result<BoundReport> {
    let nf = check_voters(n)?;
    let k = params.subset_size as f64;
    let magnitude = (k * (params.a_k - params.b_k).abs() + (d as f64 - k) * params.b_k.abs()) / nf;
    Ok(BoundReport {
        mse_bound: None,
        risk_mm: Risk::Finite(magnitude),
        risk_em: magnitude,
        risk_dd: Risk::Finite(2.0 * k * params.a_k.abs()),
    })
}

/// Bounds for one mechanism at the harness's default parameters (optimal
/// sampling masses; additive subset size `additive_k`).
pub fn mechanism_bounds(
    kind: MechanismKind,
    w: &ScoreVector,
    n: usize,
    epsilon: f64,
    additive_k: usize,
) -> Result<BoundReport> {
    match kind {
        MechanismKind::Laplace => laplace_risks(w, n, epsilon),
        MechanismKind::WeightedSampling => sampling_risks(w, n, epsilon, &optimal_sampling_params(w)?),
        MechanismKind::Additive => {
            let params = additive_params(w, epsilon, additive_k)?;
            let mut report = additive_risks(&params, w.dim(), n)?;
            if additive_k == 1 {
                report.mse_bound = Some(additive_mse_bound(w, n, epsilon)?);
            }
            Ok(report)
        }
    }
}

/// Output filter for Laplace views: keep views within L1 `radius` of some scored vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterThreshold {
    pub beta: f64,
    pub radius: f64,
}

/// `max(0, Δ·(ln(1/β) + d·ln(Δ/ε))/ε)`.
pub fn laplace_filter_threshold(w: &ScoreVector, epsilon: f64, beta: f64) -> Result<FilterThreshold> {
    check_epsilon(epsilon)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    let delta = sensitivity(w);
    let radius = if delta > 0.0 {
        delta * ((1.0 / beta).ln() + w.dim() as f64 * (delta / epsilon).ln()) / epsilon
    } else {
        0.0
    };
    Ok(FilterThreshold {
        beta,
        radius: radius.max(0.0),
    })
}

/// Smallest L1 distance from `view` to any permutation of the weights.
///
/// Matching sorted values is optimal for an L1 assignment cost.
pub fn nearest_vote_distance(view: &[f64], w: &ScoreVector) -> Result<f64> {
    if view.len() != w.dim() {
        return Err(invalid(format!(
            "view of length {} against {} candidates",
            view.len(),
            w.dim()
        )));
    }
    let mut sorted = view.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted.iter().zip(w.weights()).map(|(x, wj)| (x - wj).abs()).sum())
}

pub fn laplace_filter(
    views: &[PrivateView],
    w: &ScoreVector,
    epsilon: f64,
    beta: f64,
) -> Result<(Vec<PrivateView>, FilterThreshold)> {
    let threshold = laplace_filter_threshold(w, epsilon, beta)?;
    let mut kept = Vec::with_capacity(views.len());
    for v in views {
        if nearest_vote_distance(v.values(), w)? <= threshold.radius {
            kept.push(v.clone());
        }
    }
    Ok((kept, threshold))
}

/// Outcome of the two usefulness/soundness inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CrossCheck {
    /// `risk_EM <= (sqrt(d·n·err_MSE) + sum_j |w_j|)/n`
    pub expected_magnitude_upper: bool,
    /// `risk_DD >= 2·sqrt(err_MSE/n)`
    pub diameter_lower: bool,
}

pub fn cross_inequalities(bound: &BoundReport, w: &ScoreVector, n: usize) -> Result<CrossCheck> {
    let nf = check_voters(n)?;
    let mse = bound
        .mse_bound
        .ok_or_else(|| invalid("cross inequalities need a closed-form MSE bound"))?;
    let d = w.dim() as f64;
    let upper = ((d * nf * mse).sqrt() + w.l1_norm()) / nf;
    let lower = 2.0 * (mse / nf).sqrt();
    let slack = 1e-12;
    Ok(CrossCheck {
        expected_magnitude_upper: bound.risk_em <= upper * (1.0 + slack),
        diameter_lower: bound.risk_dd.value() >= lower * (1.0 - slack),
    })
}

/// One row of a bound table.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub rule: String,
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
    pub mechanism: MechanismKind,
    pub mse_bound: Option<f64>,
    pub risk_mm: Risk,
    pub risk_em: f64,
    pub risk_dd: Risk,
}

/// Bounds for every `(score vector, ε, mechanism)` combination, in that nesting order.
///
/// Mechanisms undefined for a rule (e.g. weighted sampling on constant weights) are skipped.
pub fn bound_table(
    rules: &[ScoreVector],
    n: usize,
    epsilons: &[f64],
    mechanisms: &[MechanismKind],
    additive_k: usize,
) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for w in rules {
        for &epsilon in epsilons {
            for &kind in mechanisms {
                let report = match mechanism_bounds(kind, w, n, epsilon, additive_k) {
                    Ok(r) => r,
                    Err(crate::Error::DegenerateRule(_)) => continue,
                    Err(e) => return Err(e),
                };
                rows.push(BoundRow {
                    rule: w.rule_name().to_string(),
                    d: w.dim(),
                    n,
                    epsilon,
                    mechanism: kind,
                    mse_bound: report.mse_bound,
                    risk_mm: report.risk_mm,
                    risk_em: report.risk_em,
                    risk_dd: report.risk_dd,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes rows with header `rule,d,n,epsilon,mechanism,mse_bound,risk_mm,risk_em,risk_dd`.
pub fn write_bound_csv<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::{builtin_score_vector, Rule};

    const GRID: [f64; 9] = [0.01, 0.1, 0.2, 0.4, 0.8, 1.0, 1.5, 2.0, 3.0];

    fn borda(d: usize) -> ScoreVector {
        builtin_score_vector(Rule::Borda, d, None).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn laplace_mse_examples() {
        assert!(rel(laplace_mse_bound(&borda(5), 10_000, 1.0).unwrap(), 0.144) < 1e-12);
        let a = laplace_mse_bound(&borda(7), 100, 0.5).unwrap();
        let b = laplace_mse_bound(&borda(7), 100, 1.0).unwrap();
        assert!(rel(a / 4.0, b) < 1e-12);
        let flat = ScoreVector::new(vec![1.0; 4], "flat").unwrap();
        assert_eq!(laplace_mse_bound(&flat, 10, 1.0).unwrap(), 0.0);
        assert!(laplace_mse_bound(&borda(5), 0, 1.0).is_err());
    }

    #[test]
    fn laplace_expected_magnitude_matches_geometric_sum() {
        for d in 3..=16 {
            for eps in GRID {
                let r = laplace_risks(&borda(d), 1, eps).unwrap();
                assert!(
                    rel(r.risk_em, borda_laplace_expected_magnitude(d, eps)) < 1e-9,
                    "d={d} eps={eps}"
                );
                assert_eq!(r.risk_mm, Risk::Infinite);
                assert_eq!(r.risk_dd, Risk::Infinite);
            }
        }
        // large budget: noise vanishes
        let r = laplace_risks(&borda(5), 4, 1e6).unwrap();
        assert!(rel(r.risk_em, 10.0 / 4.0) < 1e-5);
    }

    #[test]
    fn sampling_mse_examples() {
        let w = borda(5);
        let p = optimal_sampling_params(&w).unwrap();
        let s = 0.5f64.exp();
        let factor = 1.0 + 5.0 * s / ((s - 1.0) * (s - 1.0));
        assert!(rel(sampling_mse_bound(&w, 1, 1.0, &p).unwrap(), factor * 36.0) < 1e-12);
        assert!(rel(optimal_sampling_mse_bound(&w, 1, 1.0).unwrap(), factor * 36.0) < 1e-12);
        // large budget leaves only the sampling variance
        assert!(rel(sampling_mse_bound(&w, 1, 200.0, &p).unwrap(), 36.0) < 1e-9);
        // small budget: half of the Laplace bound for odd-d Borda
        let ratio = sampling_mse_bound(&w, 1, 1e-4, &p).unwrap() / laplace_mse_bound(&w, 1, 1e-4).unwrap();
        assert!((ratio - 0.5).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn sampling_exact_mse_matches_enumeration() {
        use crate::oracle::sampling_distribution;
        use crate::voting::{to_scored_vote, Ranking};
        for rule in [Rule::Borda, Rule::Nauru, Rule::Plurality] {
            let w = builtin_score_vector(rule, 5, None).unwrap();
            let p = optimal_sampling_params(&w).unwrap();
            let r = Ranking::new(vec![3, 0, 4, 1, 2]).unwrap();
            let v = to_scored_vote(&r, &w).unwrap();
            for eps in [0.1, 1.0, 3.0] {
                let exact: f64 = sampling_distribution(&r, &w, eps, &p)
                    .unwrap()
                    .iter()
                    .map(|(k, prob)| {
                        prob * k
                            .iter()
                            .zip(v.scores())
                            .map(|(b, x)| (f64::from_bits(*b) - x).powi(2))
                            .sum::<f64>()
                    })
                    .sum();
                assert!(
                    rel(sampling_exact_mse(&w, 1, eps, &p).unwrap(), exact) < 1e-9,
                    "{rule} eps={eps}"
                );
                assert!(sampling_mse_bound(&w, 1, eps, &p).unwrap() > exact);
            }
        }
    }

    #[test]
    fn sampling_mse_rejects_unreachable_ranks() {
        let w = borda(3);
        let p = SamplingParams::new(vec![1.0, 0.0, 0.0], 1.0).unwrap();
        assert!(sampling_mse_bound(&w, 1, 1.0, &p).is_err());
    }

    #[test]
    fn closed_form_sampling_risks_match_general_form() {
        for rule in [Rule::Borda, Rule::Nauru, Rule::Antiplurality] {
            for d in [4, 5, 8, 9, 16] {
                let w = builtin_score_vector(rule, d, None).unwrap();
                let p = optimal_sampling_params(&w).unwrap();
                for eps in GRID {
                    let general = sampling_risks(&w, 100, eps, &p).unwrap();
                    let closed = optimal_sampling_risks(&w, 100, eps).unwrap();
                    assert!(rel(general.risk_em, closed.risk_em) < 1e-9, "{rule} d={d} eps={eps}");
                    assert!(rel(general.mse_bound.unwrap(), closed.mse_bound.unwrap()) < 1e-9);
                    let c = w.median_weight();
                    let two_sided = w.weights().iter().any(|x| *x > c) && w.weights().iter().any(|x| *x < c);
                    for (g, k) in [(general.risk_mm, closed.risk_mm), (general.risk_dd, closed.risk_dd)] {
                        if two_sided {
                            assert!(rel(g.value(), k.value()) < 1e-9, "{rule} d={d} eps={eps}");
                        } else {
                            assert!(g.value() <= k.value() * (1.0 + 1e-12));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_diameter_examples() {
        let s = 0.5f64.exp();
        let r = optimal_sampling_risks(&borda(5), 1, 1.0).unwrap();
        assert!(rel(r.risk_dd.value(), 2.0 * s * 5.0 * 6.0 / (s - 1.0)) < 1e-12);
        let r = sampling_risks(&borda(5), 1, 300.0, &optimal_sampling_params(&borda(5)).unwrap()).unwrap();
        assert!(rel(r.risk_dd.value(), 2.0 * 5.0 * 6.0) < 1e-9);
    }

    #[test]
    fn additive_mse_examples() {
        let e = 1.0f64.exp();
        let hats: Vec<f64> = [4.0, 3.0, 2.0, 1.0, 0.0].iter().map(|w| w * (e - 1.0) + 4.0).collect();
        let sum: f64 = hats.iter().sum();
        let sq: f64 = hats.iter().map(|h| h * h).sum();
        let expect = (sum * sum - sq) / ((e - 1.0) * (e - 1.0));
        assert!(rel(additive_mse_bound(&borda(5), 1, 1.0).unwrap(), expect) < 1e-12);

        let eps = 0.7f64;
        let em1 = eps.exp_m1();
        let (h1, h2) = (em1 + 1.0, 1.0 - eps.exp() * 0.0);
        let two = additive_mse_bound(&borda(2), 3, eps).unwrap();
        assert!(rel(two, 2.0 * h1 * h2 / (3.0 * em1 * em1)) < 1e-12);
    }

    #[test]
    fn additive_risks_examples() {
        let p = additive_params(&borda(5), 1.0, 1).unwrap();
        let r = additive_risks(&p, 5, 10).unwrap();
        assert_eq!(r.risk_mm.value(), r.risk_em);
        let expect = ((p.a_k - p.b_k).abs() + 4.0 * p.b_k.abs()) / 10.0;
        assert!(rel(r.risk_em, expect) < 1e-15);
        assert_eq!(r.risk_dd, Risk::Finite(2.0 * p.a_k.abs()));
        assert!(r.mse_bound.is_none());
        let full = mechanism_bounds(MechanismKind::Additive, &borda(5), 10, 1.0, 1).unwrap();
        assert!(full.mse_bound.is_some());
    }

    #[test]
    fn cross_inequalities_hold_on_grid() {
        for d in [4, 8, 16] {
            let w = borda(d);
            for eps in GRID {
                for kind in [
                    MechanismKind::WeightedSampling,
                    MechanismKind::Additive,
                    MechanismKind::Laplace,
                ] {
                    let b = mechanism_bounds(kind, &w, 10_000, eps, 1).unwrap();
                    let c = cross_inequalities(&b, &w, 10_000).unwrap();
                    assert!(c.expected_magnitude_upper && c.diameter_lower, "{kind} d={d} eps={eps}");
                }
            }
        }
        let zero = BoundReport {
            mse_bound: Some(0.0),
            risk_mm: Risk::Finite(0.0),
            risk_em: 0.0,
            risk_dd: Risk::Finite(0.0),
        };
        assert!(cross_inequalities(&zero, &borda(4), 1).unwrap().diameter_lower);
    }

    #[test]
    fn finite_bounds_non_increasing_in_epsilon() {
        for rule in [Rule::Borda, Rule::Nauru, Rule::Plurality, Rule::Antiplurality] {
            for d in [4, 5, 8] {
                let w = builtin_score_vector(rule, d, None).unwrap();
                for kind in MechanismKind::ALL {
                    let reports: Vec<BoundReport> = GRID
                        .iter()
                        .map(|&e| mechanism_bounds(kind, &w, 1000, e, 1).unwrap())
                        .collect();
                    for pair in reports.windows(2) {
                        let (a, b) = (&pair[0], &pair[1]);
                        let tol = 1e-9;
                        assert!(
                            b.mse_bound.unwrap() <= a.mse_bound.unwrap() * (1.0 + tol),
                            "{kind} {rule} d={d}"
                        );
                        assert!(b.risk_em <= a.risk_em * (1.0 + tol), "{kind} {rule} d={d}");
                        if a.risk_mm.is_finite() {
                            assert!(b.risk_mm.value() <= a.risk_mm.value() * (1.0 + tol));
                            assert!(b.risk_dd.value() <= a.risk_dd.value() * (1.0 + tol));
                        }
                        for x in [b.mse_bound.unwrap(), b.risk_em, b.risk_mm.value(), b.risk_dd.value()] {
                            assert!(x >= 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn filter_threshold_examples() {
        let w = borda(5);
        let t = laplace_filter_threshold(&w, 1.0, 0.05).unwrap();
        let expect = 12.0 * (20.0f64.ln() + 5.0 * 12.0f64.ln());
        assert!(rel(t.radius, expect) < 1e-12);
        // beta near 1 and Δ/ε below 1: the radius collapses to zero
        let t = laplace_filter_threshold(&w, 24.0, 1.0 - 1e-12).unwrap();
        assert_eq!(t.radius, 0.0);
        assert!(laplace_filter_threshold(&w, 1.0, 1.0).is_err());
        assert!(laplace_filter_threshold(&w, 1.0, 0.0).is_err());
    }

    #[test]
    fn filter_keeps_exact_votes_and_drops_outliers() {
        let w = borda(5);
        let exact = PrivateView::new(vec![2.0, 3.0, 4.0, 1.0, 0.0]).unwrap();
        let far = PrivateView::new(vec![1e6, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (kept, _) = laplace_filter(&[exact.clone(), far.clone()], &w, 1.0, 0.05).unwrap();
        assert_eq!(kept, vec![exact.clone()]);
        let (kept, t) = laplace_filter(&[exact.clone(), far], &w, 24.0, 1.0 - 1e-12).unwrap();
        assert_eq!(t.radius, 0.0);
        assert_eq!(kept, vec![exact]);
    }

    #[test]
    fn nearest_distance_matches_permutation_search() {
        use itertools::Itertools;
        let w = borda(5);
        let view = [3.7, -1.2, 0.4, 9.0, 2.2];
        let brute = (0..5)
            .permutations(5)
            .map(|p| {
                p.iter()
                    .zip(&view)
                    .map(|(&i, x)| (x - w.weights()[i]).abs())
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(rel(nearest_vote_distance(&view, &w).unwrap(), brute) < 1e-12);
    }

    #[test]
    fn bound_csv_has_expected_header_and_inf() {
        let rules = vec![borda(5)];
        let rows = bound_table(&rules, 10_000, &[1.0], &MechanismKind::ALL, 1).unwrap();
        assert_eq!(rows.len(), 3);
        let mut buf = Vec::new();
        write_bound_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "rule,d,n,epsilon,mechanism,mse_bound,risk_mm,risk_em,risk_dd"
        );
        let laplace = lines.next().unwrap();
        assert!(laplace.starts_with("borda,5,10000,1.0,laplace,0.144,inf,"), "{laplace}");
        assert!(laplace.ends_with(",inf"));
    }
}
