use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use spinann_core::io::config::load_config;
use spinann_core::io::IoError;

mod commands;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    DwSweep,
    FitMtj,
    TransferFunction,
    Train,
    Deploy,
    Infer,
    Montecarlo,
    EnergyReport,
    GenData,
}

/// Domain-wall spintronic neural network co-simulation.
#[derive(Debug, Parser)]
#[command(name = "spinann", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; `{}` selects every default.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-column loading factors when deploying.
    #[arg(long)]
    dump_gamma: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let bytes = match std::fs::read(&cli.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!(
                "error: {}",
                IoError::File {
                    path: cli.config.clone(),
                    msg: e.to_string()
                }
            );
            return ExitCode::from(2);
        }
    };
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    match commands::run(cli.command, &cfg, &bytes, cli.dump_gamma) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
