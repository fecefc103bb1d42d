//! Procedural trees swaying in wind.
//!
//! A tree is a hierarchy of branches. The trunk is clamped; every other
//! branch bends about two axes perpendicular to its rest direction as a
//! linear damped oscillator driven by quadratic wind drag, and is carried
//! kinematically by its parent's rotation. The mesh is a tapered cylinder
//! per branch plus quad leaf cards with an optional flutter oscillation.
//! Generated motion can be screened by its high-frequency energy share.

mod grow;
mod params;
mod sway;

pub use grow::{grow_tree, BranchNode, BranchSkeleton, Flutter, LeafCard, Skinning};
pub use params::{Gust, SynthParams, WindField};
pub use sway::{simulate_wind, skin_motion, SwayTrajectories};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::Vec3;
use crate::mesh::{MotionSequence, TriMesh};
use crate::spectrum::hf_energy_ratio;
use crate::voxel::SparseVoxelGrid;

pub const DEFAULT_HF_CUTOFF: usize = 16;
pub const DEFAULT_HF_THRESHOLD: f64 = 0.1;

/// Outcome of the automatic high-frequency screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub hf_ratio: f64,
    pub accepted: bool,
}

/// Accept iff the voxelized motion's HF energy ratio at `cutoff` is at most
/// `threshold`.
pub fn curate(motion: &MotionSequence, grid: &SparseVoxelGrid, cutoff: usize, threshold: f64) -> Result<CurationReport> {
    let hf_ratio = hf_energy_ratio(&grid.voxelize_motion(motion)?, cutoff)?;
    Ok(CurationReport {
        hf_ratio,
        accepted: hf_ratio <= threshold,
    })
}

/// Everything produced for one procedural sample.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub skeleton: BranchSkeleton,
    pub mesh: TriMesh,
    pub skinning: Skinning,
    pub trajectories: SwayTrajectories,
    pub motion: MotionSequence,
}

/// Grow, simulate and skin one tree; injects white noise when
/// `params.noise_amplitude > 0`.
pub fn synthesize(params: &SynthParams) -> Result<SynthSample> {
    params.validate()?;
    let (skeleton, mesh, skinning) = grow_tree(params)?;
    let wind = params.wind.clone().with_seed(params.seed);
    let trajectories = simulate_wind(&skeleton, &wind, params.frames, params.fps)?;
    let mut motion = skin_motion(&skeleton, &trajectories, &mesh, &skinning)?;
    if params.noise_amplitude > 0.0 {
        motion = add_white_noise(&motion, params.noise_amplitude, params.seed)?;
    }
    Ok(SynthSample {
        skeleton,
        mesh,
        skinning,
        trajectories,
        motion,
    })
}

/// Add independent zero-mean noise to every vertex and frame after the rest
/// frame, with standard deviation `amplitude × rms(motion)` per component.
/// Static motion receives noise scaled to `amplitude` model units.
pub fn add_white_noise(motion: &MotionSequence, amplitude: f64, seed: u64) -> Result<MotionSequence> {
    let rms = motion.rms();
    let sigma = amplitude * if rms > 0.0 { rms } else { 1.0 };
    // Uniform on [−√3σ, √3σ] has standard deviation σ.
    let half = 3f64.sqrt() * sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6500_0000);
    let n = motion.vertex_count();
    let mut d = motion.displacements().to_vec();
    for x in d.iter_mut().skip(n) {
        *x += Vec3::new(
            rng.random_range(-half..=half),
            rng.random_range(-half..=half),
            rng.random_range(-half..=half),
        );
    }
    MotionSequence::new(motion.frames(), n, motion.fps(), d)
}
