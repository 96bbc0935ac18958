//! Seeded Monte Carlo experiments.
//!
//! Each trial draws a synthetic population, randomizes every vote, optionally
//! injects an attack, and scores the estimate against the true average scores.
//! Every trial's random streams are derived from `(master_seed, ε index, trial
//! index, stream)`. Results therefore do not depend on thread scheduling, and
//! configurations that differ only in mechanism or attack see the same voters.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    disguised_view, random_fraud_votes, AttackConfig, AttackKind, DisguiseParams, LaplaceDisguiseScale,
};
use crate::error::{invalid, Result};
use crate::mechanisms::{check_epsilon, MechanismKind, Randomizer};
use crate::rng::RngHandle;
use crate::voting::{
    builtin_score_vector, usefulness_metrics, AggregateResult, MetricsReport, Ranking, Rule, ScoreAccumulator,
    ScoreVector,
};

/// Privacy budgets of the experiment grid.
pub const DEFAULT_EPSILONS: [f64; 9] = [0.01, 0.1, 0.2, 0.4, 0.8, 1.0, 1.5, 2.0, 3.0];

/// Attack sizes as fractions of `n`.
pub const ATTACK_FRACTIONS: [f64; 3] = [0.001, 0.01, 0.05];

const POPULATION_STREAM: u64 = 0;
const MECHANISM_STREAM: u64 = 1;
const ATTACK_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" | "json_lines" => Ok(OutputFormat::Jsonl),
            other => Err(invalid(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub rule: Rule,
    /// Only read for k-approval.
    pub k_approval: Option<usize>,
    pub d: usize,
    pub n: usize,
    pub epsilons: Vec<f64>,
    pub mechanism: MechanismKind,
    pub additive_k: usize,
    pub attack: Option<AttackConfig>,
    pub laplace_disguise_scale: LaplaceDisguiseScale,
    pub repeats: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rule: Rule::Borda,
            k_approval: None,
            d: 8,
            n: 10_000,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            mechanism: MechanismKind::Laplace,
            additive_k: 1,
            attack: None,
            laplace_disguise_scale: LaplaceDisguiseScale::NoiseScale,
            repeats: 400,
            master_seed: 0,
            output_path: None,
            output_format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn score_vector(&self) -> Result<ScoreVector> {
        builtin_score_vector(self.rule, self.d, self.k_approval)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if self.n == 0 {
            return Err(invalid("number of voters must be at least 1"));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("at least one privacy budget is required"));
        }
        let w = self.score_vector()?;
        for &eps in &self.epsilons {
            check_epsilon(eps)?;
            Randomizer::new(self.mechanism, &w, eps, self.additive_k)?;
        }
        if let Some(AttackConfig {
            target_pair: Some((j1, j2)),
            ..
        }) = self.attack
        {
            if j1 == j2 || j1 >= self.d || j2 >= self.d {
                return Err(invalid(format!("invalid target pair ({j1}, {j2})")));
            }
        }
        Ok(())
    }

    fn disguise_params(&self) -> DisguiseParams {
        DisguiseParams {
            additive_k: self.additive_k,
            laplace_scale: self.laplace_disguise_scale,
        }
    }
}

/// One averaged output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub rule: String,
    pub d: usize,
    pub n: usize,
    pub mechanism: MechanismKind,
    pub epsilon: f64,
    /// `none` when no attack is configured.
    pub attack_kind: String,
    pub attack_count: usize,
    pub repeats: usize,
    pub seed: u64,
    pub tve: f64,
    pub mae: f64,
    pub mse: f64,
    pub low: f64,
    pub aow_rate: f64,
}

/// Draws one preference scale per candidate, then ranks each voter's
/// `r_{i,j}·α_j` with `r_{i,j} ~ U[0,1)`.
pub fn generate_population<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Ranking> {
    let alpha: Vec<f64> = (0..d).map(|_| rng.random()).collect();
    generate_population_with_scales(n, &alpha, rng)
}

/// Population for given candidate scales. Equal products rank the lower index first.
pub fn generate_population_with_scales<R: Rng + ?Sized>(n: usize, alpha: &[f64], rng: &mut R) -> Vec<Ranking> {
    let d = alpha.len();
    let mut beta = vec![0.0; d];
    (0..n)
        .map(|_| {
            for (b, a) in beta.iter_mut().zip(alpha) {
                *b = rng.random::<f64>() * a;
            }
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&x, &y| beta[y].total_cmp(&beta[x]).then(x.cmp(&y)));
            Ranking::new(order).expect("sorted indices form a permutation")
        })
        .collect()
}

fn true_aggregate(population: &[Ranking], w: &ScoreVector) -> AggregateResult {
    let mut theta = vec![0.0; w.dim()];
    for r in population {
        for (&cand, wj) in r.order().iter().zip(w.weights()) {
            theta[cand] += wj;
        }
    }
    let n = population.len() as f64;
    AggregateResult::from_theta(theta.into_iter().map(|t| t / n).collect())
}

struct Cell<'a> {
    config: &'a ExperimentConfig,
    w: ScoreVector,
    epsilon: f64,
    eps_index: usize,
    randomizer: Randomizer,
}

impl<'a> Cell<'a> {
    fn new(config: &'a ExperimentConfig, eps_index: usize) -> Result<Self> {
        let w = config.score_vector()?;
        let epsilon = *config
            .epsilons
            .get(eps_index)
            .ok_or_else(|| invalid(format!("no privacy budget at index {eps_index}")))?;
        let randomizer = Randomizer::new(config.mechanism, &w, epsilon, config.additive_k)?;
        Ok(Self {
            config,
            w,
            epsilon,
            eps_index,
            randomizer,
        })
    }

    fn stream(&self, trial: usize, stream: u64) -> RngHandle {
        RngHandle::derive(self.config.master_seed, &[self.eps_index as u64, trial as u64, stream])
    }

    fn trial(&self, trial: usize) -> Result<MetricsReport> {
        let d = self.w.dim();
        let population = generate_population(self.config.n, d, &mut self.stream(trial, POPULATION_STREAM));
        let truth = true_aggregate(&population, &self.w);

        let mut rng = self.stream(trial, MECHANISM_STREAM);
        let mut acc = ScoreAccumulator::new(d);
        let mut buf = vec![0.0; d];
        for r in &population {
            self.randomizer.randomize_into(r, &mut rng, &mut buf);
            acc.push(&buf)?;
        }

        if let Some(attack) = self.config.attack.filter(|a| a.count > 0) {
            let mut rng = self.stream(trial, ATTACK_STREAM);
            match attack.kind {
                AttackKind::DataAmplification => {
                    for r in random_fraud_votes(attack.count, d, &mut rng) {
                        self.randomizer.randomize_into(&r, &mut rng, &mut buf);
                        acc.push(&buf)?;
                    }
                }
                AttackKind::ViewDisguise => {
                    let (j1, j2) = match attack.target_pair {
                        Some(pair) => pair,
                        None => truth.top_two(),
                    };
                    let view = disguised_view(
                        self.config.mechanism,
                        &self.w,
                        self.epsilon,
                        &self.config.disguise_params(),
                        j1,
                        j2,
                    )?;
                    for _ in 0..attack.count {
                        acc.push(view.values())?;
                    }
                }
            }
        }
        usefulness_metrics(&acc.finish()?, &truth)
    }
}

/// Metrics of a single trial.
pub fn run_trial(config: &ExperimentConfig, eps_index: usize, trial_index: usize) -> Result<MetricsReport> {
    config.validate()?;
    Cell::new(config, eps_index)?.trial(trial_index)
}

/// Metrics of every trial at one budget, in trial order.
pub fn run_cell(config: &ExperimentConfig, eps_index: usize) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    let cell = Cell::new(config, eps_index)?;
    (0..config.repeats).into_par_iter().map(|t| cell.trial(t)).collect()
}

/// Averages per-trial metrics into an output row.
pub fn summarize(config: &ExperimentConfig, epsilon: f64, trials: &[MetricsReport]) -> Result<TrialReport> {
    if trials.is_empty() {
        return Err(invalid("cannot summarize zero trials"));
    }
    let count = trials.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| trials.iter().map(f).sum::<f64>() / count;
    let (attack_kind, attack_count) = match config.attack {
        Some(a) => (a.kind.to_string(), a.count),
        None => ("none".to_string(), 0),
    };
    Ok(TrialReport {
        rule: config.score_vector()?.rule_name().to_string(),
        d: config.d,
        n: config.n,
        mechanism: config.mechanism,
        epsilon,
        attack_kind,
        attack_count,
        repeats: trials.len(),
        seed: config.master_seed,
        tve: mean(|m| m.tve),
        mae: mean(|m| m.mae),
        mse: mean(|m| m.mse),
        low: mean(|m| m.low),
        aow_rate: mean(|m| if m.aow { 1.0 } else { 0.0 }),
    })
}

/// One averaged row per budget. Writes the rows when `output_path` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    config.validate()?;
    let mut rows = Vec::with_capacity(config.epsilons.len());
    for (i, &eps) in config.epsilons.iter().enumerate() {
        rows.push(summarize(config, eps, &run_cell(config, i)?)?);
    }
    if let Some(path) = &config.output_path {
        write_reports_to_path(&rows, config.output_format, path)?;
    }
    Ok(rows)
}

/// Attack counts `round(n·f)` for the standard fractions, at least 1 each.
pub fn attack_counts(n: usize) -> Vec<usize> {
    ATTACK_FRACTIONS
        .iter()
        .map(|f| ((n as f64 * f).round() as usize).max(1))
        .collect()
}

/// Runs `config` once per `(kind, count)` and concatenates the rows, ordered by
/// kind, then budget, then count. The honest population of each trial is shared
/// across all cells. Writes the rows when `output_path` is set.
pub fn run_attack_grid(config: &ExperimentConfig, kinds: &[AttackKind], counts: &[usize]) -> Result<Vec<TrialReport>> {
    let target_pair = config.attack.and_then(|a| a.target_pair);
    let mut rows = Vec::new();
    for &kind in kinds {
        let mut per_count = Vec::with_capacity(counts.len());
        for &count in counts {
            let cfg = ExperimentConfig {
                attack: Some(AttackConfig {
                    kind,
                    count,
                    target_pair,
                }),
                output_path: None,
                ..config.clone()
            };
            per_count.push(run_experiment(&cfg)?);
        }
        for i in 0..config.epsilons.len() {
            rows.extend(per_count.iter().map(|r| r[i].clone()));
        }
    }
    if let Some(path) = &config.output_path {
        write_reports_to_path(&rows, config.output_format, path)?;
    }
    Ok(rows)
}

pub fn write_reports<W: Write>(rows: &[TrialReport], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            for row in rows {
                wtr.serialize(row)?;
            }
            wtr.flush()?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn write_reports_to_path(rows: &[TrialReport], format: OutputFormat, path: &std::path::Path) -> Result<()> {
    write_reports(rows, format, BufWriter::new(File::create(path)?))
}
