//! `keyvote3d`: pose estimation from 3D point-to-keypoint vote fields.
//!
//! Subcommands: `keypoints` (FPS keypoint extraction), `pipeline` (vote →
//! fit → optional ICP refine), `eval` (ADD/ADD-S scoring), and `synth-bench`
//! (seeded synthetic robustness sweeps).
//!
//! Exit codes: 0 success, 2 ingestion or argument error, 3 degenerate
//! voting, 4 degenerate pose fit.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use keyvote3d::Error;

#[derive(Parser)]
#[command(name = "keyvote3d", version, about, max_term_width = 100)]
struct Cli {
    /// Worker thread cap for parallel stages; defaults to available cores.
    #[arg(long, global = true, env = "KEYVOTE3D_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select keypoints on a model cloud: k farthest-point samples plus the
    /// centroid as a center point.
    Keypoints(KeypointsArgs),
    /// Estimate a pose from a vote field: subsample, vote every keypoint,
    /// fit the weighted rigid transform, optionally ICP-refine.
    Pipeline(PipelineArgs),
    /// Score predicted poses against ground truth with ADD / ADD-S.
    Eval(EvalArgs),
    /// Run a seeded synthetic corruption sweep and report accuracy per cell.
    SynthBench(SynthBenchArgs),
}

#[derive(Args)]
struct KeypointsArgs {
    /// Model point cloud (PLY, ASCII or binary little-endian), meters.
    #[arg(long)]
    model: std::path::PathBuf,
    #[arg(
        long,
        default_value_t = 8,
        help = "Number of FPS keypoints; the centroid is appended, so the output holds k+1 \
                points (default 8 [paper])"
    )]
    k: usize,
    /// Output keypoints JSON.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Vote-field file: KV3DVF1 binary or its JSON mirror.
    #[arg(long)]
    votefield: std::path::PathBuf,
    /// Model point cloud (PLY), required for ICP refinement.
    #[arg(long)]
    model: std::path::PathBuf,
    /// Keypoints JSON produced by the `keypoints` subcommand.
    #[arg(long)]
    keypoints: std::path::PathBuf,
    /// Output pose JSON.
    #[arg(long)]
    out: std::path::PathBuf,

    /// Optional depth map (PGM 8/16-bit or PFM float32) giving a dense scene
    /// cloud for refinement; requires --intrinsics.
    #[arg(long, requires = "intrinsics")]
    depth: Option<std::path::PathBuf>,
    /// Camera intrinsics JSON ({fx, fy, cx, cy, width, height}).
    #[arg(long)]
    intrinsics: Option<std::path::PathBuf>,
    /// Optional mask (PGM, nonzero = keep) applied to the depth map.
    #[arg(long, requires = "depth")]
    mask: Option<std::path::PathBuf>,
    /// Unit of raw depth samples.
    #[arg(long, value_parser = parse_depth_unit, default_value = "m")]
    depth_unit: keyvote3d::io::DepthUnit,

    /// Optional JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    #[arg(
        long,
        help = "Scene points used for voting (default 500 [paper]); larger fields are \
                subsampled, smaller ones used as-is"
    )]
    n_points: Option<usize>,
    #[arg(long, help = "Inlier cosine threshold for vote counting (default 0.999 [paper])")]
    theta: Option<f64>,
    #[arg(long, help = "RANSAC hypotheses per keypoint (default 128 [repo-default])")]
    hypotheses: Option<usize>,
    /// Run ICP refinement after the keypoint fit.
    #[arg(long)]
    refine: bool,
    #[arg(long, help = "ICP iteration cap (default 10 [repo-default])")]
    refine_iters: Option<usize>,
    /// ICP correspondence radius in meters (default: 10% of model diameter).
    #[arg(long)]
    max_corr_dist: Option<f64>,
    /// Base RNG seed for subsampling and hypothesis draws (default 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted pose JSON: a single pose object or a list of them.
    #[arg(long)]
    pred: std::path::PathBuf,
    /// Ground-truth pose JSON, same shape as --pred.
    #[arg(long)]
    gt: std::path::PathBuf,
    /// Model point cloud (PLY), meters.
    #[arg(long)]
    model: std::path::PathBuf,
    /// Score with ADD-S (nearest-point matching) instead of ADD.
    #[arg(long)]
    symmetric: bool,
    #[arg(
        long,
        default_value_t = 0.10,
        help = "Pass threshold as a fraction of the model diameter (default 0.10 [paper])"
    )]
    diameter_fraction: f64,
    /// Output report JSON.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct SynthBenchArgs {
    /// Model point cloud (PLY), meters.
    #[arg(long)]
    model: std::path::PathBuf,
    /// Sweep specification JSON: {trials, diameter_fraction, voting, grid}.
    #[arg(long)]
    sweep: std::path::PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: std::path::PathBuf,
    /// Optional JSON copy of the results.
    #[arg(long)]
    out_json: Option<std::path::PathBuf>,
}

fn parse_depth_unit(s: &str) -> Result<keyvote3d::io::DepthUnit, String> {
    match s {
        "m" | "meters" => Ok(keyvote3d::io::DepthUnit::Meters),
        "mm" | "millimeters" => Ok(keyvote3d::io::DepthUnit::Millimeters),
        other => Err(format!("unknown depth unit '{other}' (expected m or mm)")),
    }
}

/// A command failure carrying its process exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Exit-code classification: voting degeneracy 3, fit degeneracy 4,
/// everything else (I/O, parsing, validation) 2.
pub fn classify(error: &Error) -> u8 {
    match error {
        Error::AllHypothesesDegenerate { .. } | Error::DegenerateLines { .. } => 3,
        Error::AtKeypoint { source, .. } => classify(source),
        Error::DegenerateCorrespondences(_)
        | Error::InsufficientWeight { .. }
        | Error::AllZeroConfidence => 4,
        _ => 2,
    }
}

pub fn fail(error: Error) -> Failure {
    Failure::new(classify(&error), error.to_string())
}

/// Ingestion-stage wrapper: any failure is exit code 2.
pub fn ingest<T>(result: keyvote3d::Result<T>, what: &str) -> Result<T, Failure> {
    result.map_err(|e| Failure::new(2, format!("{what}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }

    let result = match cli.command {
        Command::Keypoints(args) => commands::keypoints(&args),
        Command::Pipeline(args) => commands::pipeline(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::SynthBench(args) => commands::synth_bench(&args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
