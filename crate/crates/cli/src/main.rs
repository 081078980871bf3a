//! Command-line driver: each subcommand reads a JSON config, runs one
//! experiment and writes CSV files with a metadata sidecar.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uavhfl::hfl::train::Variant;

use crate::config::ConfigError;
use crate::output::Output;

#[derive(Parser)]
#[command(name = "uavhfl", version, about = "UAV-assisted hierarchical federated learning experiments")]
struct Cli {
    /// JSON config file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo trials per point, overriding the config.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Restrict training commands to one scheme.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Analytic success probability of every link in one deployment.
    Probe,
    /// Analytic versus Monte Carlo success over the threshold grid.
    Validate,
    /// Edge and backhaul success against UAV altitude.
    SweepHeight,
    /// Deployment-averaged success against the number of UAVs.
    SweepUavs,
    /// Train the schemes and record accuracy traces.
    Train,
    /// Evaluate the convergence bound and the improvement surface.
    Bound,
    /// Wall-clock latency to the accuracy target.
    Latency,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Probe => "probe",
            Command::Validate => "validate",
            Command::SweepHeight => "sweep-height",
            Command::SweepUavs => "sweep-uavs",
            Command::Train => "train",
            Command::Bound => "bound",
            Command::Latency => "latency",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Ok(threads) = std::env::var("UAVHFL_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| ConfigError(format!("UAVHFL_THREADS must be a count, got {threads:?}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if cli.variant.is_some() {
        cfg.variant = cli.variant;
    }
    cfg.validate()?;
    let out = Output {
        dir: cli.out,
        command: cli.command.name(),
        config: &cfg,
    };
    match cli.command {
        Command::Probe => commands::probe(&cfg, &out),
        Command::Validate => commands::validate(&cfg, &out),
        Command::SweepHeight => commands::sweep_height(&cfg, &out),
        Command::SweepUavs => commands::sweep_uavs(&cfg, &out),
        Command::Train => commands::train_cmd(&cfg, &out),
        Command::Bound => commands::bound(&cfg, &out),
        Command::Latency => commands::latency(&cfg, &out),
    }
}

/// 2 for bad input, 3 for numerical trouble, 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<uavhfl::Error>() {
            return match e {
                uavhfl::Error::InvalidArgument(_) | uavhfl::Error::Dataset(_) => 2,
                _ => 3,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
