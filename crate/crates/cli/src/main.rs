mod commands;
mod config;
mod impute;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status paired with the error that caused it.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NO_PLACEMENT: u8 = 4;

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: e.into() }
    }

    pub fn data(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_DATA, error: e.into() }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "pointing-augment", version, about = "Place pointing human avatars in 3D scenes and evaluate gesture grounding")]
struct Cli {
    /// Worker threads; does not change outputs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Overrides for placement parameters.
#[derive(Args, Debug, Clone, Default)]
pub struct PlacementFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub voxel_size: Option<f64>,
    #[arg(long)]
    pub jitter_deg: Option<f64>,
    #[arg(long)]
    pub num_placements: Option<usize>,
    #[arg(long)]
    pub visibility_threshold: Option<f64>,
    #[arg(long)]
    pub margin_voxels: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Place avatars in scenes and write augmented clouds plus records.
    Impute(impute::ImputeArgs),
    /// Rank object proposals by language confidence and pointing bias.
    Score(commands::ScoreArgs),
    /// IoU accuracy report from a predictions file.
    Eval(commands::EvalArgs),
    /// Dump occupancy and visibility grids for one scene target.
    Inspect(commands::InspectArgs),
    /// Write prompt text for referring-expression generation.
    Prompt(commands::PromptArgs),
    /// Generate synthetic rooms and an avatar library.
    Synth(commands::SynthArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(Failure::usage)?;
    }
    match cli.command {
        Command::Impute(a) => impute::run(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Prompt(a) => commands::prompt(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

pub fn ensure_dir(p: &PathBuf) -> CliResult {
    std::fs::create_dir_all(p).map_err(|e| Failure::data(anyhow::anyhow!("creating {}: {e}", p.display())))
}
