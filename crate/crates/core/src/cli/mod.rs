//! `posekernel` command-line driver. Every command reads one JSON config and
//! exchanges state with the others only through files in the output
//! directory.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::NO_TARGET_RATIO;
pub use config::{DeconvSettings, ExperimentConfig, FdmSettings, TrainingSettings};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "posekernel", version, about = "Acoustic pose-kernel simulation, extraction and 3D localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render empty-room and occupied recordings for every microphone.
    Simulate(CommonArgs),
    /// Recover one pose kernel per speaker/microphone pair.
    Kernel(CommonArgs),
    /// Encode every pose kernel onto the voxel grid.
    Encode(CommonArgs),
    /// Fuse encoded kernels (and heatmaps, if present) and read out positions.
    Localize(CommonArgs),
    /// Train the toy network on synthetic scenes.
    Train(CommonArgs),
    /// Evaluate a trained checkpoint on held-out synthetic scenes.
    Eval(CommonArgs),
    /// Write PGM z-slices and CSV for a PKVX field.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Human-readable results of one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub messages: Vec<String>,
    pub warnings: Vec<String>,
}

fn context(args: &CommonArgs) -> Result<commands::Context> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let out = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    std::fs::create_dir_all(&out)?;
    Ok(commands::Context { cfg, seed, out })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&context(a)?),
        Command::Kernel(a) => commands::kernel(&context(a)?),
        Command::Encode(a) => commands::encode(&context(a)?),
        Command::Localize(a) => commands::localize(&context(a)?),
        Command::Train(a) => commands::train(&context(a)?),
        Command::Eval(a) => commands::eval(&context(a)?),
        Command::Export(a) => {
            let out = match (&a.out, &a.config) {
                (Some(out), _) => out.clone(),
                (None, Some(cfg)) => ExperimentConfig::load(cfg)?.out_dir,
                (None, None) => a.field.parent().map(PathBuf::from).unwrap_or_default(),
            };
            commands::export(&a.field, &out)
        }
    }
}

/// Exit status for a command result: 0 success, 1 validation error, 2 runtime error.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}

/// Parses `args`, runs the command and prints its results; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli);
    match &result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for m in &outcome.messages {
                println!("{m}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&result)
}
