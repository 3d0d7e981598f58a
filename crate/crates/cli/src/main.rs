//! `lsfp`: oracle validation, rate CDFs, SINR reports and gain estimation.
//!
//! Exit status is 0 on success, 1 when a check fails or a run aborts, and
//! 2 on usage errors (bad flags, missing or malformed config).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsfp_core::experiments::{ExperimentConfig, Scheme};
use lsfp_core::precoding::ZfVariant;

#[derive(Debug, Parser)]
#[command(name = "lsfp", version, about = "Large-scale fading precoding simulations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file with [network], [powers] and [experiment] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo oracle suite: every variance against its closed form.
    Validate(ValidateArgs),
    /// Rate CDFs over random network draws.
    Cdf(CdfArgs),
    /// Closed-form per-user SINRs for one network draw.
    Sinr(SinrArgs),
    /// Convergence study of the large-scale gain estimator.
    EstimateBeta(BetaArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    /// Antenna count (default 32, or the config value).
    #[arg(long = "M")]
    antennas: Option<usize>,
    /// z-score beyond which a row fails.
    #[arg(long, default_value_t = 4.0)]
    z_max: f64,
}

#[derive(Debug, Args)]
struct CdfArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Comma-separated antenna grid; overrides the config.
    #[arg(long = "M", value_delimiter = ',')]
    antennas: Option<Vec<usize>>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Debug, Args)]
struct SinrArgs {
    #[arg(long, value_enum, default_value = "zf")]
    scheme: SchemeArg,
    #[arg(long = "M")]
    antennas: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Debug, Args)]
struct BetaArgs {
    #[arg(long = "M", value_delimiter = ',', default_values_t = [1_000, 10_000, 100_000])]
    antennas: Vec<usize>,
    #[arg(long, default_value_t = 400)]
    trials: usize,
    /// Users sharing the training tuples.
    #[arg(long, default_value_t = 8)]
    mu: usize,
    /// Gain of the target user.
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    /// Gain of every other user.
    #[arg(long, default_value_t = 0.2)]
    interference: f64,
    /// Uplink SNR (default: the config's rho_r, else 1).
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    None,
    Zf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Eta,
    Mu,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::None => Scheme::NoLsfp,
            SchemeArg::Zf => Scheme::ZfLsfp,
        }
    }
}

impl From<VariantArg> for ZfVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Eta => ZfVariant::Eta,
            VariantArg::Mu => ZfVariant::Mu,
        }
    }
}

/// Why a run stopped early; carries its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Check(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) => 1,
        }
    }
}

pub type Outcome = Result<(), Failure>;

impl Common {
    fn loaded(&self) -> Result<Option<ExperimentConfig>, Failure> {
        let Some(path) = &self.config else { return Ok(None) };
        if !path.is_file() {
            return Err(Failure::Usage(anyhow::anyhow!("config file {} not found", path.display())));
        }
        ExperimentConfig::load(path).map(Some).map_err(|e| Failure::Usage(e.into()))
    }

    /// Config file (or defaults) with the seed override applied.
    fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = self.loaded()?.unwrap_or_default();
        if let Some(s) = self.seed {
            cfg.network.seed = s;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Failure::Usage(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Usage(e.into()))?;
    }
    let c = &cli.common;
    match cli.command {
        Command::Validate(a) => commands::validate(c, &a),
        Command::Cdf(a) => commands::cdf(c, &a),
        Command::Sinr(a) => commands::sinr(c, &a),
        Command::EstimateBeta(a) => commands::estimate_beta(c, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Usage(e) | Failure::Check(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
