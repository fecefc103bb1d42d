#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectree_core::spectrum::fft_compress;
use spectree_core::synth::{grow_tree, SynthParams};
use spectree_core::{MotionSequence, SparseVoxelGrid, SparseVoxelSpectrum, TriMesh, Vec3, VoxelMotion};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points scattered uniformly in a box, joined into random non-degenerate
/// triangles.
pub fn random_mesh(rng: &mut ChaCha8Rng, vertices: usize, faces: usize) -> TriMesh {
    let extent = Vec3::new(rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.5..3.0));
    let points: Vec<Vec3> = (0..vertices)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..1.0) * extent.x,
                rng.random_range(-1.0..1.0) * extent.y,
                rng.random_range(-1.0..1.0) * extent.z,
            )
        })
        .collect();
    let mut tris = Vec::with_capacity(faces);
    while tris.len() < faces {
        let f = [0; 3].map(|_| rng.random_range(0..vertices as u32));
        let [a, b, c] = f.map(|i| points[i as usize]);
        if (b - a).cross(&(c - a)).norm() > 1e-6 {
            tris.push(f);
        }
    }
    TriMesh::new(points, tris).unwrap()
}

/// A flat `cols × rows` vertex sheet with spacing `h`, triangulated.
pub fn sheet_mesh(cols: usize, rows: usize, h: f64) -> TriMesh {
    let vertices = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Vec3::new(c as f64 * h, r as f64 * h, 0.0)))
        .collect();
    let v = |r: usize, c: usize| (r * cols + c) as u32;
    let faces = (0..rows - 1)
        .flat_map(|r| (0..cols - 1).flat_map(move |c| [[v(r, c), v(r, c + 1), v(r + 1, c)], [v(r, c + 1), v(r + 1, c + 1), v(r + 1, c)]]))
        .collect();
    TriMesh::new(vertices, faces).unwrap()
}

/// The default procedural tree (no simulation).
pub fn tree_mesh(seed: u64) -> TriMesh {
    grow_tree(&SynthParams::example(seed)).unwrap().1
}

/// Random per-voxel series supported on DFT bins `0..bins` (re-zeroed at frame 0).
pub fn band_limited_voxel_motion(rng: &mut ChaCha8Rng, voxels: usize, frames: usize, fps: f64, bins: usize) -> VoxelMotion {
    let mut amps = Vec::with_capacity(voxels * 3 * bins);
    for _ in 0..voxels * 3 * bins {
        amps.push((rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    // (cos, sin) of 2πkt/T, indexed [t * bins + k].
    let table: Vec<(f64, f64)> = (0..frames)
        .flat_map(|t| (0..bins).map(move |k| (TAU * ((k * t) % frames) as f64 / frames as f64).sin_cos()))
        .map(|(s, c)| (c, s))
        .collect();
    let value = |v: usize, axis: usize, t: usize| -> f64 {
        let row = &table[t * bins..(t + 1) * bins];
        let coeffs = &amps[(v * 3 + axis) * bins..(v * 3 + axis + 1) * bins];
        coeffs
            .iter()
            .zip(row)
            .enumerate()
            .map(|(k, (&(a, b), &(c, s)))| a * c + if k == 0 { 0.0 } else { b * s })
            .sum()
    };
    VoxelMotion::from_fn(frames, voxels, fps, |t, v| {
        Vec3::new(
            value(v, 0, t) - value(v, 0, 0),
            value(v, 1, t) - value(v, 1, 0),
            value(v, 2, t) - value(v, 2, 0),
        )
    })
    .unwrap()
}

/// Independent uniform noise per voxel/axis/frame (frame 0 at rest).
pub fn white_voxel_motion(rng: &mut ChaCha8Rng, voxels: usize, frames: usize, fps: f64) -> VoxelMotion {
    VoxelMotion::from_fn(frames, voxels, fps, |t, _| {
        if t == 0 {
            Vec3::zeros()
        } else {
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }
    })
    .unwrap()
}

/// Random spectrum on `grid` built from band-limited motion.
pub fn random_spectrum(rng: &mut ChaCha8Rng, grid: Arc<SparseVoxelGrid>, bins: usize, frames: usize, fps: f64) -> SparseVoxelSpectrum {
    let motion = band_limited_voxel_motion(rng, grid.voxel_count(), frames, fps, bins);
    fft_compress(&motion, grid, bins, fps).unwrap()
}

/// Per-vertex sinusoidal sway whose amplitude grows with height.
pub fn sway_motion(mesh: &TriMesh, frames: usize, fps: f64) -> MotionSequence {
    let rest = mesh.vertices().to_vec();
    MotionSequence::from_fn(frames, rest.len(), fps, |t, i| {
        let p = rest[i];
        let s = (TAU * 2.0 * t as f64 / frames as f64).sin();
        Vec3::new(0.1 * p.y * s, 0.0, 0.05 * p.y * (TAU * 3.0 * t as f64 / frames as f64).sin())
    })
    .unwrap()
}

/// A random rotation (uniform axis, uniform angle).
pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let axis = loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break Unit::new_normalize(v);
        }
    };
    Rotation3::from_axis_angle(&axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

pub fn max_abs_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}
