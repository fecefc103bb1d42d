use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::interactive::InteractiveSession;
use super::{PayloadKind, SessionConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::spectrum::{SparseVoxelSpectrum, DEFAULT_BINS, DEFAULT_FPS, DEFAULT_FRAMES};
use crate::splat::DEFAULT_PER_FACE;
use crate::voxel::{SparseVoxelGrid, MAX_RESOLUTION};

/// Shape of the pinned performance instance and its per-frame budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinnedInstance {
    /// Vertex sheet columns × rows (`N = cols · rows`).
    pub cols: usize,
    pub rows: usize,
    /// Faces kept (the first ones in row-major order).
    pub faces: usize,
    /// Consecutive vertices per voxel (`n = N / group`).
    pub group: usize,
    pub per_face: usize,
    pub bins: usize,
    pub frames: usize,
    pub fps: f64,
    /// Modal step + superpose + devoxelize budget (ms).
    pub mesh_motion_budget_ms: f64,
    /// Splat pose budget (ms).
    pub pose_budget_ms: f64,
    /// Factor allowed over the budgets on unknown hardware.
    pub tolerance: f64,
}

/// N = 100,000 vertices, n = 20,000 voxels, 5 × 40,000 splats, K = 16.
pub const PINNED: PinnedInstance = PinnedInstance {
    cols: 400,
    rows: 250,
    faces: 40_000,
    group: 5,
    per_face: DEFAULT_PER_FACE,
    bins: DEFAULT_BINS,
    frames: DEFAULT_FRAMES,
    fps: DEFAULT_FPS,
    mesh_motion_budget_ms: 13.0,
    pose_budget_ms: 2.57,
    tolerance: 2.0,
};

pub struct BenchInstance {
    pub mesh: Arc<TriMesh>,
    pub spectrum: SparseVoxelSpectrum,
}

/// Build the pinned instance: a flat sheet whose vertices are grouped five
/// at a time into voxels, with a random spectrum.
pub fn pinned_instance(seed: u64) -> Result<BenchInstance> {
    let p = PINNED;
    let vertices: Vec<Vec3> = (0..p.rows)
        .flat_map(|r| (0..p.cols).map(move |c| Vec3::new(c as f64 * 0.01, r as f64 * 0.01, 0.0)))
        .collect();
    let mut faces = Vec::with_capacity(p.faces);
    'rows: for r in 0..p.rows - 1 {
        for c in 0..p.cols - 1 {
            let v = |rr: usize, cc: usize| (rr * p.cols + cc) as u32;
            for f in [[v(r, c), v(r, c + 1), v(r + 1, c)], [v(r, c + 1), v(r + 1, c + 1), v(r + 1, c)]] {
                if faces.len() == p.faces {
                    break 'rows;
                }
                faces.push(f);
            }
        }
    }
    let mesh = Arc::new(TriMesh::new(vertices, faces)?);

    let per_row = p.cols / p.group;
    let occupied: Vec<[u32; 3]> = (0..p.rows)
        .flat_map(|r| (0..per_row).map(move |c| [c as u32, r as u32, 0]))
        .collect();
    let vertex_to_voxel: Vec<u32> = (0..p.rows * p.cols).map(|i| (i / p.group) as u32).collect();
    let grid = Arc::new(SparseVoxelGrid::from_parts(
        MAX_RESOLUTION,
        Vec3::zeros(),
        0.05,
        occupied,
        vertex_to_voxel,
    )?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.voxel_count();
    let mut coefficients = Vec::with_capacity(n * p.bins);
    for _ in 0..n * p.bins {
        coefficients.push([(); 3].map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    }
    let spectrum = SparseVoxelSpectrum::new(grid, p.bins, p.frames, p.fps, coefficients)?;
    Ok(BenchInstance { mesh, spectrum })
}

/// Median, 95th percentile and mean of a sample set, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl StageStats {
    /// Nearest-rank percentiles; all zero for an empty set.
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Self {
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
            max_ms: s[s.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub threads: usize,
    pub vertices: usize,
    pub voxels: usize,
    pub faces: usize,
    pub primitives: usize,
    pub bins: usize,
    pub modal: StageStats,
    pub devoxelize: StageStats,
    /// Modal step, superposition and devoxelization together.
    pub mesh_motion: StageStats,
    pub pose: StageStats,
    pub total: StageStats,
    pub mesh_motion_budget_ms: f64,
    pub pose_budget_ms: f64,
    pub tolerance: f64,
    /// Both medians within `tolerance ×` their budgets.
    pub within_budget: bool,
}

/// Time `frames` interactive steps (after `warmup` untimed ones) under a
/// sustained force on voxel 0.
pub fn run_bench(instance: &BenchInstance, frames: usize, warmup: usize) -> Result<BenchReport> {
    if frames == 0 {
        return Err(Error::InvalidArgument("bench needs at least one frame".into()));
    }
    let config = SessionConfig {
        per_face: PINNED.per_face,
        bins: instance.spectrum.bins(),
        fps: instance.spectrum.fps(),
        payload: PayloadKind::Vertices,
        ..SessionConfig::default()
    };
    let mut session = InteractiveSession::new(instance.mesh.clone(), &instance.spectrum, config)?;
    session.apply_force(0, Vec3::new(0.0, 0.0, 1.0), f64::MAX / 4.0)?;
    for _ in 0..warmup {
        session.step()?;
    }
    let mut samples = Vec::with_capacity(frames);
    for _ in 0..frames {
        samples.push(session.step()?.timings);
    }
    let col = |f: &dyn Fn(&super::FrameTimings) -> f64| StageStats::from_samples(&samples.iter().map(f).collect::<Vec<_>>());
    let mesh_motion = col(&|t| t.modal_ms + t.devoxelize_ms);
    let pose = col(&|t| t.pose_ms);
    let within_budget = mesh_motion.median_ms <= PINNED.tolerance * PINNED.mesh_motion_budget_ms
        && pose.median_ms <= PINNED.tolerance * PINNED.pose_budget_ms;
    Ok(BenchReport {
        frames,
        threads: rayon::current_num_threads(),
        vertices: instance.mesh.vertex_count(),
        voxels: instance.spectrum.voxel_count(),
        faces: instance.mesh.face_count(),
        primitives: session.cloud().map_or(0, |c| c.len()),
        bins: instance.spectrum.bins(),
        modal: col(&|t| t.modal_ms),
        devoxelize: col(&|t| t.devoxelize_ms),
        mesh_motion,
        pose,
        total: col(&|t| t.total_ms),
        mesh_motion_budget_ms: PINNED.mesh_motion_budget_ms,
        pose_budget_ms: PINNED.pose_budget_ms,
        tolerance: PINNED.tolerance,
        within_budget,
    })
}
