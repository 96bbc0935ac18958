use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer};

use ldp_vote::adversary::{AttackConfig, AttackKind, LaplaceDisguiseScale};
use ldp_vote::bounds::{bound_table, write_bound_csv, BoundRow};
use ldp_vote::harness::{
    attack_counts, run_attack_grid, run_experiment, write_reports, write_reports_to_path, ExperimentConfig,
    OutputFormat, TrialReport, DEFAULT_EPSILONS,
};
use ldp_vote::oracle::{run_oracles, OracleConfig};
use ldp_vote::{builtin_score_vector, MechanismKind, Rule};

#[derive(Parser)]
#[command(
    name = "ldp-vote",
    version,
    about = "Locally private positional vote aggregation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulations over a grid of privacy budgets.
    Simulate(SimulateArgs),
    /// Run simulations with data-amplification or view-disguise adversaries.
    Attack(AttackArgs),
    /// Print closed-form error and risk bounds.
    Bounds(BoundsArgs),
    /// Run exhaustive enumeration checks; exits nonzero if any fails.
    Oracle(OracleArgs),
}

fn parsed<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    Option::<String>::deserialize(d)?
        .map(|s| s.parse().map_err(D::Error::custom))
        .transpose()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

fn parsed_list<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr,
    T::Err: Display,
{
    let items = match Option::<OneOrMany>::deserialize(d)? {
        None => return Ok(None),
        Some(OneOrMany::One(s)) => s.split(',').map(|x| x.trim().to_string()).collect(),
        Some(OneOrMany::Many(v)) => v,
    };
    items
        .iter()
        .map(|s| s.parse().map_err(D::Error::custom))
        .collect::<std::result::Result<Vec<T>, _>>()
        .map(Some)
}

/// Fills every `None` field of `$cli` from `$file`.
macro_rules! fill {
    ($cli:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field; } )*
    };
}

/// Reads a JSON object whose keys are long flag names of `T`.
fn load_config<T: Args + DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let object = value.as_object().context("config file must hold a JSON object")?;
    let command = T::augment_args(clap::Command::new("config"));
    let known: Vec<&str> = command
        .get_arguments()
        .filter_map(|a| a.get_long())
        .filter(|&l| l != "config")
        .collect();
    for key in object.keys() {
        if !known.contains(&key.as_str()) {
            bail!("unknown config key '{key}' (expected one of: {})", known.join(", "));
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid values in {}", path.display()))
}

#[derive(Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct GridArgs {
    /// Voting rule: borda, nauru, plurality, antiplurality or kapproval.
    #[arg(long)]
    #[serde(deserialize_with = "parsed")]
    rule: Option<Rule>,
    /// Approved positions for the kapproval rule.
    #[arg(long)]
    k_approval: Option<usize>,
    /// Number of candidates [default: 8].
    #[arg(long, short = 'd')]
    d: Option<usize>,
    /// Number of honest voters [default: 10000].
    #[arg(long, short = 'n')]
    n: Option<usize>,
    /// Comma-separated privacy budgets [default: 0.01,0.1,0.2,0.4,0.8,1,1.5,2,3].
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Comma-separated mechanisms: laplace, weighted_sampling, additive [default: laplace].
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "parsed_list")]
    mechanism: Option<Vec<MechanismKind>>,
    /// Subset size of the additive mechanism [default: 1].
    #[arg(long)]
    additive_k: Option<usize>,
    /// Trials per budget [default: 400].
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed; every random stream is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// csv or jsonl [default: csv].
    #[arg(long)]
    #[serde(deserialize_with = "parsed")]
    format: Option<OutputFormat>,
}

impl GridArgs {
    fn fill_from(&mut self, file: GridArgs) {
        fill!(self, file; rule, k_approval, d, n, epsilons, mechanism, additive_k, repeats, seed, output, format);
    }

    fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        let master_seed = self
            .seed
            .context("a master seed is required: pass --seed or set \"seed\" in the --config file")?;
        let defaults = ExperimentConfig::default();
        let mechanisms = self.mechanism.clone().unwrap_or_else(|| vec![defaults.mechanism]);
        Ok(mechanisms
            .into_iter()
            .map(|mechanism| ExperimentConfig {
                rule: self.rule.unwrap_or(defaults.rule),
                k_approval: self.k_approval,
                d: self.d.unwrap_or(defaults.d),
                n: self.n.unwrap_or(defaults.n),
                epsilons: self.epsilons.clone().unwrap_or_else(|| defaults.epsilons.clone()),
                mechanism,
                additive_k: self.additive_k.unwrap_or(defaults.additive_k),
                repeats: self.repeats.unwrap_or(defaults.repeats),
                master_seed,
                ..ExperimentConfig::default()
            })
            .collect())
    }

    fn emit(&self, rows: &[TrialReport]) -> Result<()> {
        let format = self.format.unwrap_or_default();
        match &self.output {
            Some(path) => {
                write_reports_to_path(rows, format, path).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {} rows to {}", rows.len(), path.display());
            }
            None => write_reports(rows, format, io::stdout().lock())?,
        }
        Ok(())
    }
}

#[derive(Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// JSON file whose keys are flag names; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn simulate(mut args: SimulateArgs) -> Result<()> {
    if let Some(path) = args.config.take() {
        args.grid.fill_from(load_config::<SimulateArgs>(&path)?.grid);
    }
    let mut rows = Vec::new();
    for config in args.grid.configs()? {
        rows.extend(run_experiment(&config)?);
    }
    args.grid.emit(&rows)
}

#[derive(Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct AttackArgs {
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// Comma-separated attacks: data_amplification, view_disguise [default: both].
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "parsed_list")]
    attack_kind: Option<Vec<AttackKind>>,
    /// Comma-separated adversary counts [default: 0.1%, 1% and 5% of n].
    #[arg(long, value_delimiter = ',')]
    attack_counts: Option<Vec<usize>>,
    /// Fixed 1-based candidates `J1,J2` to demote and promote; by default the
    /// honest leader and runner-up of each trial.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    target: Option<Vec<usize>>,
    /// Laplace disguise band scale: noise_scale (Δ/ε) or sensitivity (Δ) [default: noise_scale].
    #[arg(long)]
    #[serde(deserialize_with = "parsed")]
    laplace_scale: Option<LaplaceDisguiseScale>,
    /// JSON file whose keys are flag names; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn attack(mut args: AttackArgs) -> Result<()> {
    if let Some(path) = args.config.take() {
        let mut file = load_config::<AttackArgs>(&path)?;
        args.grid.fill_from(std::mem::take(&mut file.grid));
        fill!(args, file; attack_kind, attack_counts, target, laplace_scale);
    }
    let target_pair = match args.target.as_deref() {
        None => None,
        Some([j1, j2]) if *j1 >= 1 && *j2 >= 1 => Some((j1 - 1, j2 - 1)),
        Some(other) => bail!("--target takes two 1-based candidate labels, got {other:?}"),
    };
    let kinds = args.attack_kind.clone().unwrap_or_else(|| AttackKind::ALL.to_vec());
    let mut rows = Vec::new();
    for mut config in args.grid.configs()? {
        config.laplace_disguise_scale = args.laplace_scale.unwrap_or_default();
        config.attack = Some(AttackConfig {
            kind: kinds[0],
            count: 0,
            target_pair,
        });
        let counts = args.attack_counts.clone().unwrap_or_else(|| attack_counts(config.n));
        rows.extend(run_attack_grid(&config, &kinds, &counts)?);
    }
    args.grid.emit(&rows)
}

#[derive(Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct BoundsArgs {
    /// Comma-separated rules [default: borda,nauru,plurality,antiplurality].
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "parsed_list")]
    rule: Option<Vec<Rule>>,
    /// Approved positions for the kapproval rule.
    #[arg(long)]
    k_approval: Option<usize>,
    /// Comma-separated candidate counts [default: 4,8,16,32].
    #[arg(long, short = 'd', value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Number of voters [default: 10000].
    #[arg(long, short = 'n')]
    n: Option<usize>,
    /// Comma-separated privacy budgets [default: the experiment grid].
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Comma-separated mechanisms [default: all three].
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "parsed_list")]
    mechanism: Option<Vec<MechanismKind>>,
    /// Subset size of the additive mechanism [default: 1].
    #[arg(long)]
    additive_k: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// csv or jsonl [default: csv].
    #[arg(long)]
    #[serde(deserialize_with = "parsed")]
    format: Option<OutputFormat>,
    /// JSON file whose keys are flag names; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn write_bound_rows<W: Write>(rows: &[BoundRow], format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_bound_csv(rows, out)?,
        OutputFormat::Jsonl => {
            for row in rows {
                serde_json::to_writer(&mut out, row)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn bounds(mut args: BoundsArgs) -> Result<()> {
    if let Some(path) = args.config.take() {
        let file = load_config::<BoundsArgs>(&path)?;
        fill!(args, file; rule, k_approval, d, n, epsilons, mechanism, additive_k, output, format);
    }
    let rules = args
        .rule
        .unwrap_or_else(|| vec![Rule::Borda, Rule::Nauru, Rule::Plurality, Rule::Antiplurality]);
    let dims = args.d.unwrap_or_else(|| vec![4, 8, 16, 32]);
    let mut vectors = Vec::new();
    for &d in &dims {
        for &rule in &rules {
            vectors.push(builtin_score_vector(rule, d, args.k_approval)?);
        }
    }
    let rows = bound_table(
        &vectors,
        args.n.unwrap_or(10_000),
        &args.epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec()),
        &args.mechanism.unwrap_or_else(|| MechanismKind::ALL.to_vec()),
        args.additive_k.unwrap_or(1),
    )?;
    let format = args.format.unwrap_or_default();
    match &args.output {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_bound_rows(&rows, format, io::BufWriter::new(file))?;
        }
        None => write_bound_rows(&rows, format, io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Args, Deserialize, Default)]
#[serde(rename_all = "kebab-case", default)]
struct OracleArgs {
    /// Largest candidate count to enumerate [default: 5].
    #[arg(long)]
    max_d: Option<usize>,
    /// Comma-separated privacy budgets [default: 0.1,1,3].
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Draws for the subset sampler check; 0 skips it [default: 1000000].
    #[arg(long)]
    draws: Option<usize>,
    /// Seed for the randomized checks [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Print only failures and the summary line.
    #[arg(long)]
    #[serde(skip)]
    quiet: bool,
    /// JSON file whose keys are flag names; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

fn oracle(mut args: OracleArgs) -> Result<bool> {
    if let Some(path) = args.config.take() {
        let file = load_config::<OracleArgs>(&path)?;
        fill!(args, file; max_d, epsilons, draws, seed);
    }
    let defaults = OracleConfig::default();
    let config = OracleConfig {
        max_d: args.max_d.unwrap_or(defaults.max_d),
        epsilons: args.epsilons.unwrap_or(defaults.epsilons),
        sampler_draws: args.draws.unwrap_or(defaults.sampler_draws),
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let outcomes = run_oracles(&config)?;
    let mut stdout = io::stdout().lock();
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for o in &outcomes {
        if !o.passed || !args.quiet {
            writeln!(
                stdout,
                "{} {}: {}",
                if o.passed { "PASS" } else { "FAIL" },
                o.name,
                o.detail
            )?;
        }
    }
    writeln!(stdout, "{} checks, {} failed", outcomes.len(), failed)?;
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args).map(|()| true),
        Command::Attack(args) => attack(args).map(|()| true),
        Command::Bounds(args) => bounds(args).map(|()| true),
        Command::Oracle(args) => oracle(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
