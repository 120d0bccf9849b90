use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod io;
mod manifest;

use error::CliError;

const THREADS_ENV: &str = "TAIHRI_KIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hrikit", version, about = "Close-range 3D human keypoint toolkit")]
struct Cli {
    /// Camera intrinsics JSON {fx, fy, cx, cy, width, height}.
    #[arg(long, global = true, value_name = "FILE")]
    intrinsics: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantize a camera-frame point (mm) to a voxel token.
    Encode(commands::EncodeArgs),
    /// Map a voxel token back to its cell center (mm).
    Decode(commands::DecodeArgs),
    /// Parse a prediction sequence and report diagnostics.
    Parse(commands::ParseArgs),
    /// Score predictions against ground truth with the pose reward.
    Reward(commands::RewardArgs),
    /// Train the toy token policy with group-relative policy optimization.
    #[command(name = "grpo-train")]
    GrpoTrain(commands::GrpoTrainArgs),
    /// Generate a synthetic close-range keypoint dataset.
    Synth(commands::SynthArgs),
    /// Camera-frame joint error per body-part config.
    Eval(commands::EvalArgs),
    /// Place root-relative poses in the camera frame from anchor keypoints.
    Align(commands::AlignArgs),
    /// Print the tool version.
    Version(VersionArgs),
}

#[derive(Debug, Args)]
struct VersionArgs {}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::InvalidThreads(format!("expected a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::InvalidThreads(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let ctx = commands::Context { intrinsics: cli.intrinsics };
    match cli.command {
        Command::Encode(a) => commands::encode(&ctx, a),
        Command::Decode(a) => commands::decode(&ctx, a),
        Command::Parse(a) => commands::parse(&ctx, a),
        Command::Reward(a) => commands::reward(&ctx, a),
        Command::GrpoTrain(a) => commands::grpo_train(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Align(a) => commands::align(&ctx, a),
        Command::Version(_) => {
            println!("hrikit {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
