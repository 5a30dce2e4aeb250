mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::UsageError;

#[derive(Debug, Parser)]
#[command(name = "handcontact", version, about = "Refine hand poses against object meshes through contact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refine a hand pose toward target contact with an object.
    Optimize(OptimizeArgs),
    /// Generate a perturbed dataset from synthetic grasps or an existing dataset.
    Perturb(PerturbArgs),
    /// Compute intersection, MPJPE, coverage and contact precision/recall.
    Evaluate(EvaluateArgs),
    /// Export per-point geometric features for an external contact predictor.
    Features(FeaturesArgs),
    /// Synthesize, perturb, refine and evaluate in one run.
    Roundtrip(RoundtripArgs),
    /// Write the bundled synthetic hand model to disk.
    ExportHand(ExportHandArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON or TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the seeds in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hand model JSON; the bundled synthetic hand when omitted.
    #[arg(long)]
    pub hand_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Object mesh (.obj or .ply).
    #[arg(long)]
    pub object: PathBuf,
    /// Initial hand parameters JSON.
    #[arg(long)]
    pub init: PathBuf,
    /// `file:OBJECT_MAP[,HAND_MAP]`, `reference:PARAMS` or `object-only:OBJECT_MAP`.
    #[arg(long)]
    pub targets: String,
    /// Number of restarts; overrides the config.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Multiplier from mesh file units to millimetres.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Optimize against this many randomly chosen object vertices.
    #[arg(long)]
    pub object_points: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["dataset", "grasps"])]
pub struct PerturbArgs {
    /// Re-perturb the true poses of an existing dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Synthesize this many grasps.
    #[arg(long)]
    pub grasps: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[group(id = "mode", required = true, multiple = false, args = ["dataset", "object"])]
pub struct EvaluateArgs {
    /// Dataset directory; pair with `--refined`.
    #[arg(long, requires = "refined", conflicts_with_all = ["object", "truth", "pred"])]
    pub dataset: Option<PathBuf>,
    /// Directory of refined parameters named `sample_NNNN.json`.
    #[arg(long)]
    pub refined: Option<PathBuf>,
    /// Object mesh for a single case.
    #[arg(long, requires_all = ["truth", "pred"])]
    pub object: Option<PathBuf>,
    /// Ground-truth hand parameters.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predicted (refined) hand parameters.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Starting hand parameters, reported as a `before` row.
    #[arg(long)]
    pub before: Option<PathBuf>,
    /// Ground-truth object contact map; computed from the true pose when omitted.
    #[arg(long)]
    pub truth_contact: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub object: PathBuf,
    /// Hand parameters to pose the hand at.
    #[arg(long)]
    pub init: PathBuf,
    /// Number of object points to sample.
    #[arg(long, default_value_t = 2048)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    /// Number of synthetic grasps.
    #[arg(long, default_value_t = 50)]
    pub grasps: usize,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExportHandArgs {
    /// Include the two shape coefficients.
    #[arg(long)]
    pub with_shape: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Optimize(a) => commands::optimize(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Features(a) => commands::features(a),
        Command::Roundtrip(a) => commands::roundtrip(a),
        Command::ExportHand(a) => commands::export_hand(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
