//! Pipelines built from the other modules.
//!
//! - [`run_animation`]: voxelize → compress → reconstruct → bind → pose, for
//!   offline playback of a motion sequence.
//! - [`InteractiveSession`]: one fixed-step modal simulation driven by force
//!   events; every step superposes, devoxelizes and poses.
//! - [`LiveSession`]: an interactive session on its own thread, publishing
//!   latest-wins frames and accepting forces from any thread.
//! - [`run_bench`]: per-stage timings on a pinned desk-scale instance.

mod bench;
mod interactive;
mod live;
mod log;

pub use bench::{pinned_instance, run_bench, BenchInstance, BenchReport, PinnedInstance, StageStats, PINNED};
pub use interactive::{run_interactive, Frame, InteractiveSession, PayloadKind, SceneSnapshot};
pub use live::{LiveOptions, LiveSession, MetricsReport};
pub use log::{read_event_log, write_event_log, EventRecorder, LogRecord};

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{MotionSequence, TriMesh};
use crate::modal::{Integrator, DEFAULT_DAMPING_RATIO};
use crate::spectrum::{
    fft_compress, hf_energy_ratio, lss_metric, reconstruct_motion, LssConfig, SparseVoxelSpectrum, DEFAULT_BINS,
    DEFAULT_FPS,
};
use crate::splat::{GaussianCloud, SplatPose, DEFAULT_PER_FACE};
use crate::voxel::{validate_resolution, SparseVoxelGrid, DEFAULT_RESOLUTION};

/// Default interactive step, chosen so that with the default spectrum
/// (K = 16, T = 100, 24 fps) every mode satisfies `dt·ω < 4ξ`, the range in
/// which the semi-implicit update never increases modal energy.
pub const DEFAULT_DT: f64 = 1.0 / 120.0;

/// Settings shared by the offline and interactive pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Simulation step (s).
    pub dt: f64,
    /// Modal damping ratio.
    pub xi: f64,
    /// Multiplier applied to every incoming force.
    pub force_scale: f64,
    pub integrator: Integrator,
    pub resolution: u32,
    pub bins: usize,
    pub fps: f64,
    /// Gaussians per face; 0 disables splats.
    pub per_face: usize,
    pub payload: PayloadKind,
    pub lss: LssConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            xi: DEFAULT_DAMPING_RATIO,
            force_scale: 1.0,
            integrator: Integrator::SemiImplicit,
            resolution: DEFAULT_RESOLUTION,
            bins: DEFAULT_BINS,
            fps: DEFAULT_FPS,
            per_face: DEFAULT_PER_FACE,
            payload: PayloadKind::Vertices,
            lss: LssConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        validate_resolution(self.resolution)?;
        self.lss.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidArgument(format!("ξ must lie in (0, 1), got {}", self.xi)));
        }
        if !self.force_scale.is_finite() {
            return Err(Error::NonFinite("force scale".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {}", self.fps)));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if self.payload == PayloadKind::Splats && self.per_face == 0 {
            return Err(Error::InvalidArgument("splat payload needs per_face ≥ 1".into()));
        }
        Ok(())
    }
}

/// Per-frame cost of the interactive loop, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTimings {
    /// Force projection, modal step and superposition.
    pub modal_ms: f64,
    /// Devoxelization and adding the rest positions.
    pub devoxelize_ms: f64,
    /// Splat pose.
    pub pose_ms: f64,
    /// Whole step including payload packing.
    pub total_ms: f64,
}

pub(crate) fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Wall-clock cost of each offline stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnimationTimings {
    pub grid_ms: f64,
    pub voxelize_ms: f64,
    pub compress_ms: f64,
    pub reconstruct_ms: f64,
    pub bind_ms: f64,
    /// Sum over all frames.
    pub pose_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationReport {
    pub frames: usize,
    pub vertices: usize,
    pub voxels: usize,
    pub bins: usize,
    pub primitives: usize,
    /// Relative L2 error of the reconstruction against the voxel-shared
    /// source motion (the best any spectrum on this grid can do).
    pub reconstruction_error: f64,
    /// Relative L2 error against the raw per-vertex source motion.
    pub source_error: f64,
    /// High-frequency energy share of the voxelized source at cutoff `K`.
    pub hf_ratio: f64,
    /// LSS metric of the spectrum; absent when there are too few voxels.
    pub lss: Option<f64>,
    pub timings: AnimationTimings,
}

#[derive(Debug, Clone)]
pub struct AnimationOutput {
    pub grid: Arc<SparseVoxelGrid>,
    pub spectrum: SparseVoxelSpectrum,
    pub reconstructed: MotionSequence,
    pub cloud: Option<GaussianCloud>,
    /// One pose per frame (empty when splats are disabled).
    pub poses: Vec<SplatPose>,
    pub report: AnimationReport,
}

/// Offline pipeline: compress `motion` on `mesh`'s grid, reconstruct it,
/// and pose splats on every reconstructed frame.
pub fn run_animation(mesh: &TriMesh, motion: &MotionSequence, config: &SessionConfig) -> Result<AnimationOutput> {
    config.validate()?;
    if motion.vertex_count() != mesh.vertex_count() {
        return Err(Error::Mismatch(format!(
            "motion has {} vertices, mesh has {}",
            motion.vertex_count(),
            mesh.vertex_count()
        )));
    }
    let mut timings = AnimationTimings::default();

    let t = Instant::now();
    let grid = Arc::new(SparseVoxelGrid::build(mesh, config.resolution)?);
    timings.grid_ms = elapsed_ms(t);

    let t = Instant::now();
    let voxel_motion = grid.voxelize_motion(motion)?;
    timings.voxelize_ms = elapsed_ms(t);

    let t = Instant::now();
    let spectrum = fft_compress(&voxel_motion, grid.clone(), config.bins, motion.fps())?;
    timings.compress_ms = elapsed_ms(t);

    let t = Instant::now();
    let reconstructed = reconstruct_motion(&spectrum, &grid)?;
    timings.reconstruct_ms = elapsed_ms(t);

    let shared = grid.devoxelize_motion(&voxel_motion)?;
    let reconstruction_error = reconstructed.relative_l2_error(&shared)?;
    let source_error = reconstructed.relative_l2_error(motion)?;
    let cutoff = config.bins.min(motion.frames() / 2);
    let hf_ratio = hf_energy_ratio(&voxel_motion, cutoff)?;
    let lss = if config.lss.kappa < grid.voxel_count() {
        Some(lss_metric(&spectrum, &grid.voxel_centers(), &config.lss)?)
    } else {
        None
    };

    let mut poses = Vec::new();
    let cloud = if config.per_face > 0 {
        let t = Instant::now();
        let cloud = GaussianCloud::bind(mesh, config.per_face)?;
        timings.bind_ms = elapsed_ms(t);
        let t = Instant::now();
        let mut deformed = mesh.vertices().to_vec();
        let mut pose = cloud.rest_pose().clone();
        poses.reserve(reconstructed.frames());
        for f in 0..reconstructed.frames() {
            for ((out, rest), d) in deformed.iter_mut().zip(mesh.vertices()).zip(reconstructed.frame(f)) {
                *out = rest + d;
            }
            cloud.pose_into(&deformed, &mut pose)?;
            poses.push(pose.clone());
        }
        timings.pose_ms = elapsed_ms(t);
        Some(cloud)
    } else {
        None
    };

    let report = AnimationReport {
        frames: motion.frames(),
        vertices: mesh.vertex_count(),
        voxels: grid.voxel_count(),
        bins: config.bins,
        primitives: cloud.as_ref().map_or(0, GaussianCloud::len),
        reconstruction_error,
        source_error,
        hf_ratio,
        lss,
        timings,
    };
    Ok(AnimationOutput {
        grid,
        spectrum,
        reconstructed,
        cloud,
        poses,
        report,
    })
}

/// `rest + displacement` for every vertex.
pub fn displaced(rest: &[Vec3], displacement: &[Vec3]) -> Vec<Vec3> {
    rest.iter().zip(displacement).map(|(r, d)| r + d).collect()
}
