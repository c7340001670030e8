use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hetqkd_cli::{cmd_estimate, cmd_finite, cmd_keyrate, cmd_simulate, cmd_tolerance, emit, CliError, RunConfig};

/// Key rates, tolerances, finite-size sweeps and simulations for CV-QKD with
/// an imbalanced heterodyne receiver.
#[derive(Parser)]
#[command(name = "hetqkd", version)]
struct Cli {
    /// TOML configuration; built-in defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `out` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Four key-rate variants over a parameter grid.
    Keyrate,
    /// Largest tolerable excess noise per variant.
    Tolerance,
    /// Finite-size rates against distance and block size.
    Finite,
    /// Simulate frames, estimate, realign and rate them.
    Simulate,
    /// Estimate parameters from frame files.
    Estimate { files: Vec<PathBuf> },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let artifacts = match &cli.command {
        Command::Keyrate => cmd_keyrate(&cfg)?,
        Command::Tolerance => cmd_tolerance(&cfg)?,
        Command::Finite => cmd_finite(&cfg)?,
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Estimate { files } => cmd_estimate(&cfg, files)?,
    };
    emit(&artifacts, cfg.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hetqkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
