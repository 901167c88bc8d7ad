//! `tga`: ingest dynamic networks, train DDNE, attack it, and compare reports.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "tga", version, about = "Time-aware gradient attacks on dynamic link prediction")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set attack.budget=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory; defaults to `output` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slice the dataset into snapshots and write statistics.
    Ingest,
    /// Train one model per history length and horizon.
    Train,
    /// Attack the trained models and write reports.
    Attack {
        /// Directory holding the checkpoints; defaults to the output directory.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Render a comparison table from report files.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Input("--config is required".into()))?;
    let cfg = RunConfig::load(&config_path, &cli.overrides, cli.seed)?;
    let out = cli.out.unwrap_or_else(|| cfg.output.clone());
    match cli.command {
        Command::Ingest => commands::ingest(&cfg, &out),
        Command::Train => commands::train(&cfg, &out),
        Command::Attack { checkpoints } => {
            let dir = checkpoints.unwrap_or_else(|| out.clone());
            commands::attack(&cfg, &out, &dir)
        }
        Command::Report { files } => commands::report(&files, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
