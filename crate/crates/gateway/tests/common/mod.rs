#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectree_core::engine::LiveOptions;
use spectree_core::spectrum::fft_compress;
use spectree_core::{LiveSession, SessionConfig, SparseVoxelGrid, SparseVoxelSpectrum, TriMesh, Vec3, VoxelMotion};

pub const RESOLUTION: u32 = 8;

/// Surface of the cube `[-1, 1]³`, each side split into `n × n` quads.
pub fn cube_mesh(n: usize) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // (normal axis, sign); the two in-plane axes follow cyclically.
    for (axis, sign) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)] {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let base = vertices.len() as u32;
        for i in 0..=n {
            for j in 0..=n {
                let mut p = Vec3::zeros();
                p[axis] = sign;
                p[u] = -1.0 + 2.0 * i as f64 / n as f64;
                p[v] = -1.0 + 2.0 * j as f64 / n as f64;
                vertices.push(p);
            }
        }
        let at = |i: usize, j: usize| base + (i * (n + 1) + j) as u32;
        for i in 0..n {
            for j in 0..n {
                faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    TriMesh::new(vertices, faces).unwrap()
}

/// A spectrum of random band-limited voxel motion (K = 16, T = 100, 24 fps).
pub fn random_spectrum(grid: Arc<SparseVoxelGrid>, seed: u64) -> SparseVoxelSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (frames, bins) = (100, 16);
    let amps: Vec<f64> = (0..grid.voxel_count() * 3 * bins).map(|_| rng.random_range(-0.05..0.05)).collect();
    let value = |v: usize, axis: usize, t: usize| -> f64 {
        (0..bins)
            .map(|k| amps[(v * 3 + axis) * bins + k] * (TAU * (k * t) as f64 / frames as f64).sin())
            .sum()
    };
    let motion = VoxelMotion::from_fn(frames, grid.voxel_count(), 24.0, |t, v| {
        Vec3::new(value(v, 0, t), value(v, 1, t), value(v, 2, t))
    })
    .unwrap();
    fft_compress(&motion, grid, bins, 24.0).unwrap()
}

pub struct Scene {
    pub mesh: Arc<TriMesh>,
    pub grid: Arc<SparseVoxelGrid>,
    pub spectrum: SparseVoxelSpectrum,
}

pub fn cube_scene() -> Scene {
    let mesh = cube_mesh(4);
    let grid = Arc::new(SparseVoxelGrid::build(&mesh, RESOLUTION).unwrap());
    let spectrum = random_spectrum(grid.clone(), 3);
    Scene {
        mesh: Arc::new(mesh),
        grid,
        spectrum,
    }
}

pub fn config() -> SessionConfig {
    SessionConfig {
        resolution: RESOLUTION,
        per_face: 2,
        ..SessionConfig::default()
    }
}

/// A paced live session on the cube scene.
pub fn live(config: SessionConfig) -> (Scene, Arc<LiveSession>) {
    let scene = cube_scene();
    let session = LiveSession::start(
        scene.mesh.clone(),
        &scene.spectrum,
        config,
        LiveOptions {
            realtime: true,
            ..LiveOptions::default()
        },
    )
    .unwrap();
    (scene, Arc::new(session))
}
