//! `causal-posterior`: simulate scenarios, fit outcome models, and turn
//! posterior draws into causal effect summaries. Results go to files; stdout
//! carries one JSON object per progress event.
//!
//! Exit codes: 0 ok, 1 replay mismatch, 2 usage or schema error, 3 R-hat
//! above 1.1 (outputs still written), 4 sampler initialization failure.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;
use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "causal-posterior", version, about = "Bayesian causal effect estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit an outcome model and write its posterior draws.
    Fit(FitArgs),
    /// Turn posterior draws into causal estimand draws.
    Effects(EffectsArgs),
    /// Posterior summaries and convergence diagnostics of a draws file.
    Summarize(SummarizeArgs),
    /// Brute-force ground truth of a scenario estimand.
    Oracle(OracleArgs),
    /// Re-run a manifest and check every output byte for byte.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
pub struct SimulateArgs {
    /// dose, partialpool, sensitivity, gcomp, gcomp-markov or bnp.
    #[arg(long)]
    scenario: String,
    /// Sample size; defaults to the scenario's own.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Linear,
    Dose,
    #[value(name = "partialpool")]
    PartialPool,
    Gcomp,
    Dp,
    Gp,
    Bart,
}

#[derive(clap::Args, Debug)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    data: PathBuf,
    /// Flat key=value model settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4000)]
    iter: usize,
    /// Defaults to half of --iter.
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EffectsMode {
    Marginal,
    Stratified,
    GcompStatic,
    GcompDynamic,
    Sensitivity,
}

#[derive(clap::Args, Debug)]
pub struct EffectsArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: EffectsMode,
    /// Regime file for the treated arm of a g-computation contrast.
    #[arg(long)]
    regime: Option<PathBuf>,
    /// Regime file for the reference arm.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Prior on the bias, e.g. `pointmass:0`, `gamma:1,3`, `normal:0,0.577`.
    #[arg(long)]
    sens_prior: Option<String>,
    /// Place the prior on the negated bias.
    #[arg(long)]
    negate: bool,
    /// Use one column of the draws file as the estimand.
    #[arg(long)]
    column: Option<String>,
    /// Simulated trajectories per posterior draw.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct SummarizeArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    scenario: String,
    /// ate, dose:K, or:V, omitted-bias or regimes (with --regime/--reference).
    #[arg(long)]
    estimand: String,
    #[arg(long)]
    regime: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    n_mc: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn execute(cli: &Cli, args: &[String], allow_replay: bool) -> Result<i32, CliError> {
    let (name, out, outcome) = match &cli.command {
        Command::Simulate(a) => ("simulate", &a.out, commands::simulate(a)?),
        Command::Fit(a) => ("fit", &a.out, commands::fit(a)?),
        Command::Effects(a) => ("effects", &a.out, commands::effects(a)?),
        Command::Summarize(a) => ("summarize", &a.out, commands::summarize(a)?),
        Command::Oracle(a) => ("oracle", &a.out, commands::oracle(a)?),
        Command::Replay { manifest } => {
            if !allow_replay {
                return Err(CliError::usage("a manifest cannot replay another replay"));
            }
            return Ok(commands::replay(manifest)?.code);
        }
    };
    let m = RunManifest::new(name, args, outcome.seed, &outcome.inputs, &outcome.outputs)?;
    m.write(&RunManifest::path_for(out))?;
    Ok(outcome.code)
}

/// Parses and runs `args` (without the binary name).
fn run(args: &[String], allow_replay: bool) -> Result<i32, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("causal-posterior".to_string()).chain(args.iter().cloned()))
        .map_err(|e| CliError::usage(e.to_string()))?;
    execute(&cli, args, allow_replay)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::try_parse_from(std::env::args()).unwrap_or_else(|e| e.exit());
    let code = match execute(&cli, &args, true) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
