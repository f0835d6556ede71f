use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psmlab_cli::commands::{cmd_analyze, cmd_simulate, cmd_sweep, cmd_validate};
use psmlab_cli::config::load_config;
use psmlab_cli::CliError;

/// Attempt-rate and saturation-throughput laboratory for an 802.11 cell
/// with one power-save station: closed-form model, slot-level protocol
/// simulator, and a Monte-Carlo oracle for the closed forms.
#[derive(Parser)]
#[command(name = "psmlab", version, about)]
struct Cli {
    /// Configuration file (flat `key = value`); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Override sim.seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override sim.replications from the config.
    #[arg(long, global = true)]
    replications: Option<u32>,

    /// Emit a per-event trace (simulate only).
    #[arg(long, global = true)]
    trace: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the closed-form model for the configured schedule.
    Analyze,
    /// Run one protocol simulation and report empirical estimates.
    Simulate,
    /// Sweep cwmin: analysis plus replicated simulations, CSV and plot data.
    Sweep,
    /// Check the closed forms against the Monte-Carlo oracle.
    Validate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(replications) = cli.replications {
        config.replications = replications;
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze => cmd_analyze(&config, &mut out),
        Command::Simulate => cmd_simulate(&config, &cli.out, cli.trace, &mut out),
        Command::Sweep => cmd_sweep(&config, &cli.out, &mut out),
        Command::Validate => cmd_validate(&config, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
