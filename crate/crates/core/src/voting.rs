//! Positional voting: score vectors, rankings, scored votes, the average-score
//! estimator and the usefulness metrics computed against the true average.
//!
//! Candidates are stored 0-based; anything printed for humans uses the 1-based
//! `A1..Ad` labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Built-in positional voting rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Borda,
    Nauru,
    Plurality,
    Antiplurality,
    Kapproval,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::Borda,
        Rule::Nauru,
        Rule::Plurality,
        Rule::Antiplurality,
        Rule::Kapproval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Borda => "borda",
            Rule::Nauru => "nauru",
            Rule::Plurality => "plurality",
            Rule::Antiplurality => "antiplurality",
            Rule::Kapproval => "kapproval",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "borda" => Ok(Rule::Borda),
            "nauru" => Ok(Rule::Nauru),
            "plurality" => Ok(Rule::Plurality),
            "antiplurality" => Ok(Rule::Antiplurality),
            "kapproval" => Ok(Rule::Kapproval),
            other => Err(invalid(format!("unknown voting rule '{other}'"))),
        }
    }
}

/// Non-increasing weights `w_1 >= ... >= w_d` awarded by rank position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    weights: Vec<f64>,
    rule_name: String,
}

impl ScoreVector {
    pub fn new(weights: Vec<f64>, rule_name: impl Into<String>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(invalid(format!(
                "score vector needs at least 2 entries, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("score vector entries must be finite"));
        }
        if weights.windows(2).any(|p| p[0] < p[1]) {
            return Err(invalid("score vector must be non-increasing"));
        }
        Ok(Self {
            weights,
            rule_name: rule_name.into(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule_name(&self) -> &str {
        &self.rule_name
    }

    /// Number of candidates `d`.
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn max(&self) -> f64 {
        self.weights[0]
    }

    pub fn min(&self) -> f64 {
        self.weights[self.dim() - 1]
    }

    pub fn is_constant(&self) -> bool {
        self.max() == self.min()
    }

    /// `w_{ceil(d/2)}`, the median-position weight.
    pub fn median_weight(&self) -> f64 {
        self.weights[self.dim().div_ceil(2) - 1]
    }

    /// Sum of absolute deviations from the median-position weight.
    pub fn omega(&self) -> f64 {
        let c = self.median_weight();
        self.weights.iter().map(|w| (w - c).abs()).sum()
    }
}

/// Canonical weights for a built-in rule over `d` candidates.
pub fn builtin_score_vector(rule: Rule, d: usize, k: Option<usize>) -> Result<ScoreVector> {
    if d < 2 {
        return Err(invalid(format!("need at least 2 candidates, got {d}")));
    }
    let weights: Vec<f64> = match rule {
        Rule::Borda => (0..d).map(|j| (d - 1 - j) as f64).collect(),
        Rule::Nauru => (1..=d).map(|j| 1.0 / j as f64).collect(),
        Rule::Plurality => (0..d).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
        Rule::Antiplurality => (0..d).map(|j| if j + 1 < d { 1.0 } else { 0.0 }).collect(),
        Rule::Kapproval => {
            let k = k.ok_or_else(|| invalid("k-approval requires k"))?;
            if k == 0 || k >= d {
                return Err(invalid(format!("k-approval needs 1 <= k < d, got k={k}, d={d}")));
            }
            (0..d).map(|j| if j < k { 1.0 } else { 0.0 }).collect()
        }
    };
    let name = match (rule, k) {
        (Rule::Kapproval, Some(k)) => format!("{k}-approval"),
        _ => rule.to_string(),
    };
    ScoreVector::new(weights, name)
}

/// Largest L1 distance between two scored votes: `sum_j |w_j - w_{d-j+1}|`.
pub fn sensitivity(w: &ScoreVector) -> f64 {
    let ws = w.weights();
    l1_distance(ws, ws.iter().rev().copied())
}

/// L1 distance with the terms summed in ascending order, so the result depends
/// only on the multiset of coordinate gaps and not on candidate labelling.
pub fn l1_distance(a: &[f64], b: impl IntoIterator<Item = f64>) -> f64 {
    let mut gaps: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    gaps.sort_by(f64::total_cmp);
    gaps.iter().sum()
}

/// A voter's preference order, most preferred candidate first (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let d = order.len();
        let mut seen = vec![false; d];
        for &c in &order {
            if c >= d || std::mem::replace(&mut seen[c], true) {
                return Err(invalid(format!("{order:?} is not a permutation of 0..{d}")));
            }
        }
        Ok(Self { order })
    }

    /// Builds a ranking from the 1-based candidate labels used in prose (`A1..Ad`).
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let order = labels
            .iter()
            .map(|&l| l.checked_sub(1).ok_or_else(|| invalid("candidate labels are 1-based")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    pub fn identity(d: usize) -> Self {
        Self {
            order: (0..d).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Candidate placed at 0-based rank `position`.
    pub fn candidate_at(&self, position: usize) -> usize {
        self.order[position]
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.order.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "A{}", c + 1)?;
        }
        Ok(())
    }
}

/// Per-candidate scores of one vote; always a permutation of the rule's weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredVote(Vec<f64>);

impl ScoredVote {
    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ScoredVote {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `scores[order[j]] = w_j`.
pub fn to_scored_vote(ranking: &Ranking, w: &ScoreVector) -> Result<ScoredVote> {
    if ranking.len() != w.dim() {
        return Err(invalid(format!(
            "ranking has {} candidates but score vector has {}",
            ranking.len(),
            w.dim()
        )));
    }
    let mut scores = vec![0.0; w.dim()];
    for (&cand, &wj) in ranking.order().iter().zip(w.weights()) {
        scores[cand] = wj;
    }
    Ok(ScoredVote(scores))
}

/// The randomized report a voter sends to the aggregator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateView(Vec<f64>);

impl PrivateView {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("private view entries must be finite"));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PrivateView {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<ScoredVote> for PrivateView {
    fn from(v: ScoredVote) -> Self {
        Self(v.0)
    }
}

/// Average scores (true or estimated) and the winning candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub theta: Vec<f64>,
    pub winner_index: usize,
}

impl AggregateResult {
    pub fn from_theta(theta: Vec<f64>) -> Self {
        let winner_index = argmax_lowest(&theta);
        Self { theta, winner_index }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Indices of the first and second highest scores (ties to the lower index).
    pub fn top_two(&self) -> (usize, usize) {
        let first = self.winner_index;
        let second = self
            .theta
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != first)
            .fold(None::<(usize, f64)>, |best, (j, &t)| match best {
                Some((_, bt)) if bt >= t => best,
                _ => Some((j, t)),
            })
            .map(|(j, _)| j)
            .unwrap_or(first);
        (first, second)
    }
}

fn argmax_lowest(theta: &[f64]) -> usize {
    let mut best = 0;
    for (j, &t) in theta.iter().enumerate().skip(1) {
        if t > theta[best] {
            best = j;
        }
    }
    best
}

/// Running sum of equally sized vectors; `finish` yields their elementwise mean.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    sum: Vec<f64>,
    count: usize,
}

impl ScoreAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            sum: vec![0.0; d],
            count: 0,
        }
    }

    pub fn push(&mut self, view: &[f64]) -> Result<()> {
        if view.len() != self.sum.len() {
            return Err(invalid(format!(
                "view of length {} does not match dimension {}",
                view.len(),
                self.sum.len()
            )));
        }
        for (s, v) in self.sum.iter_mut().zip(view) {
            *s += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<AggregateResult> {
        if self.count == 0 {
            return Err(invalid("cannot aggregate an empty list of views"));
        }
        let n = self.count as f64;
        Ok(AggregateResult::from_theta(
            self.sum.into_iter().map(|s| s / n).collect(),
        ))
    }
}

/// Elementwise mean of the views (the average-score estimator).
pub fn aggregate<V: AsRef<[f64]>>(views: &[V]) -> Result<AggregateResult> {
    let first = views
        .first()
        .ok_or_else(|| invalid("cannot aggregate an empty list of views"))?;
    let mut acc = ScoreAccumulator::new(first.as_ref().len());
    for v in views {
        acc.push(v.as_ref())?;
    }
    acc.finish()
}

/// Per-trial usefulness metrics. `aow` is a single trial's winner match; the
/// harness averages it into a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub tve: f64,
    pub mae: f64,
    pub low: f64,
    pub aow: bool,
}

/// Compares an estimate against the true average scores.
///
/// Loss of winner is measured on the true scores: `theta[true winner] - theta[estimated winner]`.
pub fn usefulness_metrics(estimate: &AggregateResult, truth: &AggregateResult) -> Result<MetricsReport> {
    if estimate.dim() != truth.dim() {
        return Err(invalid(format!(
            "estimate has dimension {} but truth has {}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let (mut mse, mut tve, mut mae) = (0.0f64, 0.0f64, 0.0f64);
    for (e, t) in estimate.theta.iter().zip(&truth.theta) {
        let diff = (e - t).abs();
        mse += diff * diff;
        tve += diff;
        mae = mae.max(diff);
    }
    let low = truth.theta[truth.winner_index] - truth.theta[estimate.winner_index];
    Ok(MetricsReport {
        mse,
        tve,
        mae,
        low,
        aow: estimate.winner_index == truth.winner_index,
    })
}
