//! `snapset`: dataset generation, training, evaluation, and analysis reports
//! for set-attention snapshot classifiers.
//!
//! Every subcommand reads one config file (TOML; JSON with a `.json`
//! extension), merges the shared flags over it (flags win), echoes the
//! resolved configuration to `manifest.toml` in the output directory, and
//! then runs. A manifest is itself a valid config, so any run can be
//! reproduced byte for byte by feeding its manifest back with no flags.
//!
//! Exit codes: 0 on success, 1 when a computation produced a non-finite
//! value, 2 for configuration, data-format, and I/O errors.

mod config;
mod eval_cmd;
mod generate;
mod model_io;
mod report;
mod train_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use snapset_core::{Error, Result};

use config::{load_config, write_manifest, Precision, Resolved, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "snapset", version, about = "Set-attention classification of measurement snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Generate labeled snapshot datasets (toric / rqc / parity).
    Generate(CommonArgs),
    /// Train a classifier on snapshot files and write a checkpoint.
    Train(CommonArgs),
    /// Score snapshot files with a trained checkpoint.
    Eval(CommonArgs),
    /// Produce analysis reports (xeb / attention / sample_complexity).
    Report(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Generate(a) | Command::Train(a) | Command::Eval(a) | Command::Report(a) => a,
        }
    }
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Run configuration file (TOML; JSON with a .json extension).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Root seed for every random stream; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread cap, recorded in the manifest; overrides the config file.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Model arithmetic precision; overrides the config file.
    #[arg(long, value_enum)]
    precision: Option<Precision>,
}

fn resolve(args: &CommonArgs, file: &RunConfig) -> Result<Resolved> {
    let threads = args.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Error::config("threads must be at least 1"));
    }
    Ok(Resolved {
        seed: args.seed.or(file.seed).unwrap_or(0),
        threads,
        precision: args.precision.or(file.precision).unwrap_or(Precision::F64),
        out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let args = cli.command.args();
    let file = load_config(&args.config)?;
    let resolved = resolve(args, &file)?;
    std::fs::create_dir_all(&resolved.out).map_err(|e| {
        Error::config(format!("cannot create output directory {}: {e}", resolved.out.display()))
    })?;
    write_manifest(cli.command.name(), &file, &resolved)?;

    match &cli.command {
        Command::Generate(_) => {
            let block = file
                .generate
                .as_ref()
                .ok_or_else(|| Error::config("config has no [generate] block"))?;
            generate::run(block, &resolved).map(|_| ())
        }
        Command::Train(_) => {
            let block = file
                .train
                .as_ref()
                .ok_or_else(|| Error::config("config has no [train] block"))?;
            train_cmd::run_with_precision(block, &resolved)
        }
        Command::Eval(_) => {
            let block = file
                .eval
                .as_ref()
                .ok_or_else(|| Error::config("config has no [eval] block"))?;
            eval_cmd::run_with_precision(block, &resolved)
        }
        Command::Report(_) => {
            let block = file
                .report
                .as_ref()
                .ok_or_else(|| Error::config("config has no [report] block"))?;
            report::run(block, &resolved)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
