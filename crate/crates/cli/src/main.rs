//! `spectree`: scripting entry point for every pipeline stage.
//!
//! Exit codes: 0 success, 2 usage error, 3 bad input data, 4 runtime failure.
//! Logs go to stderr; machine-readable output goes to files or to stdout as
//! JSON.

mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectree_core::engine::PayloadKind;
use spectree_core::Integrator;

/// Environment variable capping worker threads.
const THREADS_ENV: &str = "SPECTREE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spectree", version, about = "Sparse voxel spectrum tree dynamics")]
struct Cli {
    /// Session settings as JSON; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Grow, animate and curate procedural trees.
    Synth(SynthArgs),
    /// Compress per-vertex motion into a sparse voxel spectrum.
    Compress(CompressArgs),
    /// Reconstruct motion from a spectrum and pose face-bound splats.
    Animate(AnimateArgs),
    /// Run an interactive session behind the WebSocket gateway.
    Serve(ServeArgs),
    /// Time the interactive loop on the pinned instance.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Procedural parameters (JSON).
    params: PathBuf,
    /// Output directory; one subdirectory per accepted sample.
    out_dir: PathBuf,
    /// Samples to generate, with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// First seed (defaults to the seed in the parameters).
    #[arg(long)]
    seed: Option<u64>,
    /// Voxel resolution used for curation.
    #[arg(short = 'R', long)]
    resolution: Option<u32>,
    /// Curation cutoff bin.
    #[arg(long, default_value_t = spectree_core::synth::DEFAULT_HF_CUTOFF)]
    cutoff: usize,
    /// Largest accepted high-frequency energy ratio.
    #[arg(long, default_value_t = spectree_core::synth::DEFAULT_HF_THRESHOLD)]
    threshold: f64,
    /// Mesh file format.
    #[arg(long, default_value = "obj", value_parser = ["obj", "ply"])]
    mesh_format: String,
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Rest mesh (.obj or .ply) defining the voxel grid.
    mesh: PathBuf,
    /// Per-vertex motion (.motn).
    motion: PathBuf,
    /// Output spectrum (.svsp).
    out: PathBuf,
    /// Frequency bins kept.
    #[arg(short = 'K', long = "bins")]
    bins: Option<usize>,
    /// Voxel resolution (power of two).
    #[arg(short = 'R', long)]
    resolution: Option<u32>,
    /// Frame rate recorded in the spectrum (defaults to the motion's).
    #[arg(long)]
    fps: Option<f64>,
    /// Print hf ratio, lss and reconstruction error as JSON.
    #[arg(long)]
    report: bool,
}

#[derive(Debug, Args)]
struct AnimateArgs {
    /// Rest mesh (.obj or .ply).
    mesh: PathBuf,
    /// Spectrum (.svsp) built on this mesh.
    spectrum: PathBuf,
    /// Output directory for per-frame splat PLYs, motion and report.
    out_dir: PathBuf,
    /// Gaussians per face (0 writes motion only).
    #[arg(long)]
    per_face: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Rest mesh (.obj or .ply).
    mesh: PathBuf,
    /// Spectrum (.svsp) built on this mesh.
    spectrum: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// TCP port (0 picks a free one).
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Simulation step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Modal damping ratio.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    force_scale: Option<f64>,
    /// `semi-implicit` or `explicit`.
    #[arg(long)]
    integrator: Option<Integrator>,
    /// Streamed payload: `vertices` or `splats`.
    #[arg(long)]
    payload: Option<PayloadKind>,
    /// Gaussians per face.
    #[arg(long)]
    per_face: Option<usize>,
    /// Replay a recorded event log (JSONL).
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Record every applied force to a JSONL event log.
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
    /// Stop after this many steps.
    #[arg(long)]
    max_frames: Option<u64>,
    /// Step as fast as possible instead of at wall-clock pace.
    #[arg(long)]
    no_realtime: bool,
    /// On exit, write the last frame's payload as little-endian f32.
    #[arg(long, value_name = "FILE")]
    final_frame: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Timed frames.
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Untimed frames run first.
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    /// Seed of the random spectrum.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// A usage problem found after argument parsing.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<spectree_core::Error>() {
            return if e.is_data_error() { 3 } else { 4 };
        }
        if cause.is::<serde_json::Error>() {
            return 3;
        }
    }
    4
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let base = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => commands::synth(&base, args),
        Command::Compress(args) => commands::compress(&base, args),
        Command::Animate(args) => commands::animate(&base, args),
        Command::Serve(args) => serve::serve(&base, args),
        Command::Bench(args) => commands::bench(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
