//! Sparse voxel grid over mesh vertices.
//!
//! Every vertex belongs to exactly one occupied voxel. Voxelization averages
//! member displacements; devoxelization copies each voxel's payload back to
//! its members verbatim.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::{MotionSequence, TriMesh};

pub const DEFAULT_RESOLUTION: u32 = 128;
pub const MAX_RESOLUTION: u32 = 512;

/// Resolutions are powers of two up to 512.
pub fn validate_resolution(resolution: u32) -> Result<()> {
    if (2..=MAX_RESOLUTION).contains(&resolution) && resolution.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "voxel resolution {resolution} is not a power of two in [2, {MAX_RESOLUTION}]"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVoxelGrid {
    resolution: u32,
    origin: Vec3,
    voxel_size: f64,
    occupied: Vec<[u32; 3]>,
    vertex_to_voxel: Vec<u32>,
    /// CSR inverse map: members of voxel `v` are
    /// `members[offsets[v]..offsets[v + 1]]`, ascending.
    offsets: Vec<u32>,
    members: Vec<u32>,
}

#[inline]
fn linear_key(c: [u32; 3], r: u32) -> u64 {
    (c[0] as u64 * r as u64 + c[1] as u64) * r as u64 + c[2] as u64
}

impl SparseVoxelGrid {
    pub fn build(mesh: &TriMesh, resolution: u32) -> Result<Self> {
        Self::from_points(mesh.vertices(), resolution)
    }

    /// Cubic voxels of edge `longest AABB edge / R`, origin half a voxel
    /// below the AABB minimum. Occupied voxels are ordered lexicographically
    /// by coordinate.
    pub fn from_points(points: &[Vec3], resolution: u32) -> Result<Self> {
        validate_resolution(resolution)?;
        let bb = Aabb::from_points(points).ok_or(Error::EmptyMesh)?;
        let longest = bb.longest_edge();
        let voxel_size = if longest > 0.0 { longest / resolution as f64 } else { 1.0 };
        let origin = bb.min - Vec3::repeat(0.5 * voxel_size);

        let cells: Vec<[u32; 3]> = points
            .iter()
            .map(|p| cell_of(p, &origin, voxel_size, resolution))
            .collect();
        let mut keys: Vec<u64> = cells.iter().map(|&c| linear_key(c, resolution)).collect();
        keys.sort_unstable();
        keys.dedup();
        let vertex_to_voxel: Vec<u32> = cells
            .iter()
            .map(|&c| keys.binary_search(&linear_key(c, resolution)).unwrap() as u32)
            .collect();
        let r = resolution as u64;
        let occupied = keys
            .iter()
            .map(|&k| [(k / (r * r)) as u32, ((k / r) % r) as u32, (k % r) as u32])
            .collect();
        Self::assemble(resolution, origin, voxel_size, occupied, vertex_to_voxel)
    }

    /// Rebuild from stored layout, checking every invariant.
    pub fn from_parts(
        resolution: u32,
        origin: Vec3,
        voxel_size: f64,
        occupied: Vec<[u32; 3]>,
        vertex_to_voxel: Vec<u32>,
    ) -> Result<Self> {
        validate_resolution(resolution)?;
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidArgument(format!("voxel size {voxel_size} must be positive")));
        }
        if let Some(c) = occupied.iter().find(|c| c.iter().any(|&x| x >= resolution)) {
            return Err(Error::InvalidArgument(format!("voxel {c:?} outside a {resolution}³ grid")));
        }
        let mut seen = HashMap::with_capacity(occupied.len());
        for (i, c) in occupied.iter().enumerate() {
            if let Some(j) = seen.insert(linear_key(*c, resolution), i) {
                return Err(Error::InvalidArgument(format!("voxels {j} and {i} share coordinate {c:?}")));
            }
        }
        let n = occupied.len();
        if let Some(v) = vertex_to_voxel.iter().find(|&&v| v as usize >= n) {
            return Err(Error::InvalidArgument(format!("vertex mapped to voxel {v} of {n}")));
        }
        Self::assemble(resolution, origin, voxel_size, occupied, vertex_to_voxel)
    }

    fn assemble(
        resolution: u32,
        origin: Vec3,
        voxel_size: f64,
        occupied: Vec<[u32; 3]>,
        vertex_to_voxel: Vec<u32>,
    ) -> Result<Self> {
        let n = occupied.len();
        if vertex_to_voxel.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut counts = vec![0u32; n + 1];
        for &v in &vertex_to_voxel {
            counts[v as usize + 1] += 1;
        }
        if let Some(empty) = counts[1..].iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!("voxel {empty} owns no vertex")));
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut members = vec![0u32; vertex_to_voxel.len()];
        for (vertex, &voxel) in vertex_to_voxel.iter().enumerate() {
            let slot = &mut cursor[voxel as usize];
            members[*slot as usize] = vertex as u32;
            *slot += 1;
        }
        Ok(Self {
            resolution,
            origin,
            voxel_size,
            occupied,
            vertex_to_voxel,
            offsets,
            members,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    /// Number of occupied voxels `n`.
    pub fn voxel_count(&self) -> usize {
        self.occupied.len()
    }

    /// Number of vertices `N` the grid partitions.
    pub fn vertex_count(&self) -> usize {
        self.vertex_to_voxel.len()
    }

    pub fn occupied(&self) -> &[[u32; 3]] {
        &self.occupied
    }

    pub fn vertex_to_voxel(&self) -> &[u32] {
        &self.vertex_to_voxel
    }

    pub fn members(&self, voxel: usize) -> &[u32] {
        &self.members[self.offsets[voxel] as usize..self.offsets[voxel + 1] as usize]
    }

    pub fn voxel_center(&self, voxel: usize) -> Vec3 {
        let c = self.occupied[voxel];
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.voxel_size
    }

    pub fn voxel_centers(&self) -> Vec<Vec3> {
        (0..self.voxel_count()).map(|v| self.voxel_center(v)).collect()
    }

    /// True when both grids describe the same vertex partition.
    pub fn same_layout(&self, other: &SparseVoxelGrid) -> bool {
        self.resolution == other.resolution
            && self.occupied == other.occupied
            && self.vertex_to_voxel == other.vertex_to_voxel
    }

    fn check_vertices(&self, n: usize) -> Result<()> {
        if n != self.vertex_count() {
            return Err(Error::Mismatch(format!(
                "motion has {n} vertices, grid was built on {}",
                self.vertex_count()
            )));
        }
        Ok(())
    }

    /// Per-voxel mean of member displacements, frame by frame.
    pub fn voxelize_motion(&self, motion: &MotionSequence) -> Result<VoxelMotion> {
        self.check_vertices(motion.vertex_count())?;
        let n = self.voxel_count();
        let mut out = vec![Vec3::zeros(); motion.frames() * n];
        out.par_chunks_mut(n).enumerate().for_each(|(t, dst)| {
            let frame = motion.frame(t);
            for (v, slot) in dst.iter_mut().enumerate() {
                let members = self.members(v);
                let mut sum = Vec3::zeros();
                for &i in members {
                    sum += frame[i as usize];
                }
                *slot = sum / members.len() as f64;
            }
        });
        Ok(VoxelMotion {
            frames: motion.frames(),
            voxel_count: n,
            fps: motion.fps(),
            displacements: out,
        })
    }

    /// Copy each voxel's payload to every vertex it owns.
    pub fn devoxelize<T: Clone + Send + Sync>(&self, values: &[T]) -> Result<Vec<T>> {
        if values.len() != self.voxel_count() {
            return Err(Error::Mismatch(format!(
                "payload has {} entries, grid has {} voxels",
                values.len(),
                self.voxel_count()
            )));
        }
        Ok(self
            .vertex_to_voxel
            .iter()
            .map(|&v| values[v as usize].clone())
            .collect())
    }

    /// Allocation-free variant of [`devoxelize`](Self::devoxelize).
    pub fn devoxelize_into<T: Copy>(&self, values: &[T], out: &mut [T]) -> Result<()> {
        if values.len() != self.voxel_count() || out.len() != self.vertex_count() {
            return Err(Error::Mismatch("devoxelize buffer sizes".into()));
        }
        for (dst, &v) in out.iter_mut().zip(&self.vertex_to_voxel) {
            *dst = values[v as usize];
        }
        Ok(())
    }

    /// Devoxelize a whole voxel motion back to a per-vertex sequence.
    pub fn devoxelize_motion(&self, motion: &VoxelMotion) -> Result<MotionSequence> {
        if motion.voxel_count != self.voxel_count() {
            return Err(Error::Mismatch(format!(
                "voxel motion has {} voxels, grid has {}",
                motion.voxel_count,
                self.voxel_count()
            )));
        }
        let nv = self.vertex_count();
        let mut out = vec![Vec3::zeros(); motion.frames * nv];
        out.par_chunks_mut(nv).enumerate().for_each(|(t, dst)| {
            let src = motion.frame(t);
            for (slot, &v) in dst.iter_mut().zip(&self.vertex_to_voxel) {
                *slot = src[v as usize];
            }
        });
        MotionSequence::new(motion.frames, nv, motion.fps, out)
    }
}

/// Voxel cell of a point; floor semantics, clamped into the grid.
pub fn cell_of(p: &Vec3, origin: &Vec3, voxel_size: f64, resolution: u32) -> [u32; 3] {
    let max = (resolution - 1) as f64;
    let mut c = [0u32; 3];
    for a in 0..3 {
        let f = ((p[a] - origin[a]) / voxel_size).floor();
        c[a] = f.clamp(0.0, max) as u32;
    }
    c
}

/// Per-voxel displacement over `T` frames (frame-major: `[t * n + v]`).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMotion {
    frames: usize,
    voxel_count: usize,
    fps: f64,
    displacements: Vec<Vec3>,
}

impl VoxelMotion {
    pub fn new(frames: usize, voxel_count: usize, fps: f64, displacements: Vec<Vec3>) -> Result<Self> {
        if frames < 2 {
            return Err(Error::InvalidArgument(format!("voxel motion needs ≥ 2 frames, got {frames}")));
        }
        if displacements.len() != frames * voxel_count {
            return Err(Error::Mismatch(format!(
                "expected {frames}×{voxel_count} displacements, got {}",
                displacements.len()
            )));
        }
        if displacements.iter().any(|d| !d.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("voxel motion".into()));
        }
        if displacements[..voxel_count].iter().any(|d| *d != Vec3::zeros()) {
            return Err(Error::InvalidArgument("frame 0 must be the rest frame (all zero)".into()));
        }
        Ok(Self {
            frames,
            voxel_count,
            fps,
            displacements,
        })
    }

    /// Builds from a closure `(frame, voxel) -> displacement`; frame 0 is
    /// forced to zero.
    pub fn from_fn(frames: usize, voxel_count: usize, fps: f64, mut f: impl FnMut(usize, usize) -> Vec3) -> Result<Self> {
        let mut d = Vec::with_capacity(frames * voxel_count);
        for t in 0..frames {
            for v in 0..voxel_count {
                d.push(if t == 0 { Vec3::zeros() } else { f(t, v) });
            }
        }
        Self::new(frames, voxel_count, fps, d)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn voxel_count(&self) -> usize {
        self.voxel_count
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frame(&self, t: usize) -> &[Vec3] {
        &self.displacements[t * self.voxel_count..(t + 1) * self.voxel_count]
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }

    /// Time series of one voxel along one axis.
    pub fn series(&self, voxel: usize, axis: usize) -> Vec<f64> {
        (0..self.frames)
            .map(|t| self.displacements[t * self.voxel_count + voxel][axis])
            .collect()
    }

    pub fn truncated(&self, frames: usize) -> Result<Self> {
        let frames = frames.min(self.frames);
        Self::new(
            frames,
            self.voxel_count,
            self.fps,
            self.displacements[..frames * self.voxel_count].to_vec(),
        )
    }
}
