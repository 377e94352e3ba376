//! `ddsc` command-line interface: run benchmark experiments, inspect
//! checkpoints and validate configurations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{cmd_inspect, cmd_run, cmd_validate, CliError, OUTPUT_ROOT_ENV};
use crate::config::{parse_on_off, Overrides};

#[derive(Parser)]
#[command(name = "ddsc", version, about = "Dynamic dual-signal curriculum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (strategy, seed) pair and write curves, summary and config.
    Run(RunArgs),
    /// Print a summary of a curriculum checkpoint.
    Inspect { checkpoint: PathBuf },
    /// Check a configuration and print it with all defaults resolved.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat dotted-key TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (must be empty or absent).
    #[arg(long, help = format!("Output directory; defaults to a fresh run directory under ${OUTPUT_ROOT_ENV} or ./runs"))]
    out: Option<PathBuf>,
    /// Comma-separated strategies: ddsc, uniform, static_entropy, self_paced.
    #[arg(long)]
    strategies: Option<String>,
    /// Seed count N (seeds 0..N) or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    label_fraction: Option<f64>,
    #[arg(long)]
    shift_strength: Option<f64>,
    /// Write per-epoch curriculum checkpoints: on|off.
    #[arg(long, value_parser = parse_on_off)]
    checkpoints: Option<bool>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            strategies: self.strategies.clone(),
            seeds: self.seeds.clone(),
            epochs: self.epochs,
            label_fraction: self.label_fraction,
            shift_strength: self.shift_strength,
            checkpoints: self.checkpoints,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args.config.as_deref(), &args.overrides()).map(|_| ()),
        Command::Validate(args) => cmd_validate(args.config.as_deref(), &args.overrides()).map(|text| print!("{text}")),
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            report_exit(&err)
        }
    }
}

fn report_exit(err: &CliError) -> ExitCode {
    ExitCode::from(err.exit_code() as u8)
}
