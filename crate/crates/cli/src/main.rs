use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::{CommandKind, ExperimentConfig, Overrides, Preset, Resolved};

#[derive(Debug, Parser)]
#[command(name = "graph-rbm", version, about = "Heat equation on metric graphs with random batch time stepping")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for realizations.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Full implicit Euler solve with an error report.
    Solve,
    /// Random batch ensemble with error, variance and bound reports.
    Rbm,
    /// Convergence sweep over mesh sizes with delta tied to h.
    Sweep,
    /// Deterministic and random batch optimal control.
    Control,
    /// Decomposition summary and error bounds, without solving.
    Report,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Solve => CommandKind::Solve,
            Command::Rbm => CommandKind::Rbm,
            Command::Sweep => CommandKind::Sweep,
            Command::Control => CommandKind::Control,
            Command::Report => CommandKind::Report,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides { preset: cli.preset, seed: cli.seed, jobs: cli.jobs, out: cli.out.clone() };
    let result = (|| {
        let cfg = match &cli.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let dir = cli.config.as_deref().and_then(|p| p.parent());
        let resolved = Resolved::new(cli.command.into(), cfg, dir, &overrides)?;
        commands::run(&resolved)
    })();
    match result {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("graph-rbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
