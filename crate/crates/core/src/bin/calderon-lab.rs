use std::path::PathBuf;
use std::process::ExitCode;

use calderon_lab::cli::{run, Command};
use clap::{Parser, Subcommand};

/// DN-map simulation and higher-order linearization reconstruction.
#[derive(Parser)]
#[command(name = "calderon-lab", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    Forward,
    DnMeasure,
    Linearize,
    Reconstruct,
    CavityExp,
    PartialExp,
    IdentityCheck,
    Selftest,
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::from_default_env()
        .filter_level(if args.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    let command = match args.command {
        Cmd::Forward => Command::Forward,
        Cmd::DnMeasure => Command::DnMeasure,
        Cmd::Linearize => Command::Linearize,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::CavityExp => Command::CavityExp,
        Cmd::PartialExp => Command::PartialExp,
        Cmd::IdentityCheck => Command::IdentityCheck,
        Cmd::Selftest => Command::Selftest,
    };
    let code = run(command, args.config.as_deref(), &args.out, args.jobs);
    ExitCode::from(code as u8)
}
