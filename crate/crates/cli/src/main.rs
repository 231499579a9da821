//! `voxmesh`: replay posed point-cloud frames into a mesh, generate synthetic
//! scans, and score or render the result.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use voxmesh_core::Error;

#[derive(Parser)]
#[command(name = "voxmesh", version, about = "Incremental triangle meshing of posed point-cloud frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register and mesh a frame sequence.
    Run(RunArgs),
    /// Render a synthetic scan sequence from a scene and a scan script.
    Synth(SynthArgs),
    /// Score a mesh against a scene or a ground-truth point file.
    Evaluate(EvaluateArgs),
    /// Render a mesh into a depth image.
    Rasterize(RasterizeArgs),
    /// Unproject a depth image into world points.
    Reinforce(ReinforceArgs),
    /// Convert a mesh file between PLY and OBJ.
    Export(ExportArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// `key = value` config file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mechanical, solid_state or custom.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    frames_dir: PathBuf,
    /// `timestamp tx ty tz qx qy qz qw` per line, one per frame file.
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    out_mesh: Option<PathBuf>,
    /// ply, ply-ascii, ply-binary or obj; defaults from the extension.
    #[arg(long)]
    mesh_format: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    export_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Sweep the map for consistency after every frame.
    #[arg(long)]
    check_integrity: bool,
}

#[derive(Args)]
pub struct SynthArgs {
    /// box-town, plane-only, street, or a scene file.
    #[arg(long, default_value = "box-town")]
    scene: String,
    /// box-town, plane-only, orbit, street, or a script file.
    #[arg(long, default_value = "box-town")]
    script: String,
    /// Output directory; receives frames/, trajectory.txt, scene.txt and script.txt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Frame count for the orbit and street scripts.
    #[arg(long, default_value_t = 50)]
    frames: usize,
    /// Depth noise standard deviation, meters.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the scene surfaces as a mesh.
    #[arg(long)]
    gt_mesh: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Scene name or file, or a binary point file (`.bin`).
    #[arg(long)]
    gt: String,
    #[arg(long, default_value_t = voxmesh_core::eval::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = voxmesh_core::eval::DEFAULT_SAMPLE_RESOLUTION)]
    resolution: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// mean_of_extremes, spread or max_only.
    #[arg(long, default_value = "mean_of_extremes")]
    angle_rule: String,
    /// JSON report; key=value lines always go to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
pub struct CameraArgs {
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long, default_value_t = 90.0)]
    hfov: f64,
    #[arg(long, default_value_t = 70.0)]
    vfov: f64,
    #[arg(long)]
    near: Option<f64>,
    #[arg(long)]
    far: Option<f64>,
    /// Camera-to-world pose: tx ty tz qx qy qz qw.
    #[arg(long, num_args = 7, allow_hyphen_values = true, conflicts_with = "lookat")]
    pose: Option<Vec<f64>>,
    /// Eye and target: ex ey ez tx ty tz; image down is world -z.
    #[arg(long, num_args = 6, allow_hyphen_values = true)]
    lookat: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    camera: CameraArgs,
}

#[derive(Args)]
pub struct ReinforceArgs {
    #[arg(long)]
    depth: PathBuf,
    /// Binary point file in the frame format, world coordinates.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

/// Exit status for a failed command.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Integrity(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Synth(a) => commands::synth(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Rasterize(a) => commands::rasterize(a),
        Command::Reinforce(a) => commands::reinforce(a),
        Command::Export(a) => commands::export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
