//! `hrnet`: data generation, training, inference and evaluation for RGB to
//! hyperspectral reconstruction.

mod colormap;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hrnet_core::model::WidthScale;
use hrnet_core::spectral::Track;

#[derive(Parser)]
#[command(name = "hrnet", version, about = "Hyperspectral reconstruction from RGB")]
struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cubes with clean and degraded RGB renders.
    GenData(GenDataArgs),
    /// Train a network.
    Train(TrainArgs),
    /// Score predicted cubes against ground truth.
    Eval(EvalArgs),
    /// Reconstruct cubes from RGB images.
    Infer(InferArgs),
    /// Average the predictions of several checkpoints and score the result.
    Ensemble(EnsembleArgs),
    /// Write pseudo-colour PNGs of selected bands of a cube.
    Render(RenderArgs),
    /// Print MACs, parameter counts and weight sizes per width scale.
    Report(ReportArgs),
    /// Run the finite-difference gradient suite.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Number of scenes.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Height and width of each scene.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Run config whose `[degrade]` table sets the real-track pipeline.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for checkpoints and the training log.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_width_scale)]
    pub width_scale: Option<WidthScale>,
    #[arg(long, value_parser = parse_track)]
    pub track: Option<Track>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    /// Training dataset root.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// Validation dataset root.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground truth: a dataset root or a directory of cubes.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory of predicted cubes, matched to ground truth by file name.
    #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
    pub pred: Option<PathBuf>,
    /// Predict with this checkpoint from the dataset's RGB renders instead.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_track, default_value = "clean")]
    pub track: Track,
    /// Response CSV for back-projected error (default: the dataset's, else built in).
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// Metrics CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// RGB file (PNG or 3-band HSC1) or a directory of them.
    #[arg(long)]
    pub input: PathBuf,
    /// Output cube file, or directory when the input is a directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EnsembleArgs {
    /// Member checkpoints (repeat the flag).
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    /// Dataset root with ground truth and RGB renders.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_track, default_value = "clean")]
    pub track: Track,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RenderArgs {
    /// HSC1 cube.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Band centres in nm.
    #[arg(long, value_delimiter = ',', default_values_t = [400u32, 410, 420, 500, 600, 700])]
    pub bands: Vec<u32>,
    #[arg(long)]
    pub response: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Architecture from this run config (default: the full-size network).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report only this scale.
    #[arg(long, value_parser = parse_width_scale)]
    pub width_scale: Option<WidthScale>,
    /// CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradCheckArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

fn parse_width_scale(s: &str) -> Result<WidthScale, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    WidthScale::try_from(v).map_err(|e| e.to_string())
}

fn parse_track(s: &str) -> Result<Track, String> {
    s.parse().map_err(|e: hrnet_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Infer(a) => commands::infer(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Render(a) => commands::render(a),
        Command::Report(a) => commands::report(a),
        Command::GradCheck(a) => commands::grad_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
