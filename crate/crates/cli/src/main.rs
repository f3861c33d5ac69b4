//! `pathflow`: runs network simulations and the trace-variation experiments
//! from a TOML scenario file.

mod config;
mod error;
mod modes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Mode;
use error::CliError;
use modes::Output;

#[derive(Debug, Parser)]
#[command(name = "pathflow", version, about)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV files and summary.txt.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override a config entry, e.g. `--set numerics.cfl=0.4` or `--set roads.0.cells=80`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a network scenario and write per-road densities, fractions and the junction audit.
    Simulate,
    /// Trace variation of the explicit solution whose boundary trace oscillates.
    Counterexample {
        /// Number of oscillation blocks (overrides `counterexample.blocks`).
        #[arg(long)]
        blocks: Option<usize>,
    },
    /// Variation of numerical interface fluxes under grid refinement.
    VerifyTv,
    /// Distance between network solutions as an inflow perturbation shrinks.
    Stability,
    /// Spatial variation of densities and fractions across resolutions.
    BvPropagation,
    /// Front tracking against Godunov on the same interpolated flux.
    Convergence,
    /// Check a scenario without solving it.
    Validate {
        /// Mode to check for; defaults to the config's `mode`, else simulate.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Counterexample { .. } => "counterexample",
            Command::VerifyTv => "verify-tv",
            Command::Stability => "stability",
            Command::BvPropagation => "bv-propagation",
            Command::Convergence => "convergence",
            Command::Validate { .. } => "validate",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let needs_config = !matches!(cli.command, Command::Counterexample { .. });
    if needs_config && cli.config.is_none() {
        return Err(CliError::Config(format!("{} needs --config", cli.command.name())));
    }
    let cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    let mut out = Output::new(&cli.out, cli.command.name())?;
    match &cli.command {
        Command::Simulate => modes::simulate(&cfg, &mut out)?,
        Command::Counterexample { blocks } => modes::counterexample(&cfg, *blocks, &mut out)?,
        Command::VerifyTv => modes::verify_tv(&cfg, &mut out)?,
        Command::Stability => modes::stability(&cfg, &mut out)?,
        Command::BvPropagation => modes::bv_propagation(&cfg, &mut out)?,
        Command::Convergence => modes::convergence(&cfg, &mut out)?,
        Command::Validate { mode } => {
            let mode = mode.or(cfg.mode).unwrap_or(Mode::Simulate);
            modes::validate(&cfg, mode, &mut out)?
        }
    }
    out.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATHFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
