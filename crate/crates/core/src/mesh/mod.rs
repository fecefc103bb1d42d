//! Static tree geometry and dense per-vertex motion.

mod io;

pub use io::{load_mesh, read_obj, read_ply_mesh, save_mesh, write_obj, write_ply_mesh, LoadedMesh};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{triangle_area, Aabb, Vec3, MIN_FACE_AREA};

/// Triangle mesh: vertex positions plus vertex-index triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Strict constructor: every index in range and every face non-degenerate.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let (mesh, dropped) = Self::with_degenerate_dropped(vertices, faces)?;
        if dropped > 0 {
            return Err(Error::InvalidArgument(format!("{dropped} degenerate face(s)")));
        }
        Ok(mesh)
    }

    /// Validates indices and drops faces with area ≤ 1e-12. Returns the mesh
    /// and the number of dropped faces.
    pub fn with_degenerate_dropped(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<(Self, usize)> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(format!("vertex {i}")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(Error::InvalidArgument(format!(
                    "face {fi} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            let [a, b, c] = f.map(|i| &vertices[i as usize]);
            if triangle_area(a, b, c) > MIN_FACE_AREA {
                kept.push(*f);
            }
        }
        let dropped = faces.len() - kept.len();
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok((TriMesh { vertices, faces: kept }, dropped))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("mesh has at least one vertex")
    }
}

/// Per-vertex displacement over `T` frames, relative to the rest mesh.
/// Stored frame-major: `displacements[t * N + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: usize,
    vertex_count: usize,
    fps: f64,
    displacements: Vec<Vec3>,
}

impl MotionSequence {
    pub fn new(frames: usize, vertex_count: usize, fps: f64, displacements: Vec<Vec3>) -> Result<Self> {
        if frames < 2 {
            return Err(Error::InvalidArgument(format!("motion needs at least 2 frames, got {frames}")));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if displacements.len() != frames * vertex_count {
            return Err(Error::Mismatch(format!(
                "expected {frames}×{vertex_count} displacements, got {}",
                displacements.len()
            )));
        }
        if let Some(i) = displacements.iter().position(|d| !d.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(format!(
                "displacement of vertex {} at frame {}",
                i % vertex_count.max(1),
                i / vertex_count.max(1)
            )));
        }
        if displacements[..vertex_count].iter().any(|d| *d != Vec3::zeros()) {
            return Err(Error::InvalidArgument("frame 0 must be the rest frame (all zero)".into()));
        }
        Ok(Self {
            frames,
            vertex_count,
            fps,
            displacements,
        })
    }

    pub fn zeros(frames: usize, vertex_count: usize, fps: f64) -> Result<Self> {
        Self::new(frames, vertex_count, fps, vec![Vec3::zeros(); frames * vertex_count])
    }

    /// Builds a sequence from per-frame closures; frame 0 is forced to zero.
    pub fn from_fn(
        frames: usize,
        vertex_count: usize,
        fps: f64,
        mut f: impl FnMut(usize, usize) -> Vec3,
    ) -> Result<Self> {
        let mut d = Vec::with_capacity(frames * vertex_count);
        for t in 0..frames {
            for i in 0..vertex_count {
                d.push(if t == 0 { Vec3::zeros() } else { f(t, i) });
            }
        }
        Self::new(frames, vertex_count, fps, d)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frame(&self, t: usize) -> &[Vec3] {
        &self.displacements[t * self.vertex_count..(t + 1) * self.vertex_count]
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }

    /// First `frames` frames.
    pub fn truncated(&self, frames: usize) -> Result<Self> {
        let frames = frames.min(self.frames);
        Self::new(
            frames,
            self.vertex_count,
            self.fps,
            self.displacements[..frames * self.vertex_count].to_vec(),
        )
    }

    /// Root-mean-square displacement over all frames and vertices.
    pub fn rms(&self) -> f64 {
        if self.displacements.is_empty() {
            return 0.0;
        }
        let ss: f64 = self.displacements.iter().map(|d| d.norm_squared()).sum();
        (ss / self.displacements.len() as f64).sqrt()
    }

    /// `‖self − other‖₂ / ‖other‖₂` over all frames; absolute error when the
    /// reference is identically zero.
    pub fn relative_l2_error(&self, reference: &MotionSequence) -> Result<f64> {
        if self.frames != reference.frames || self.vertex_count != reference.vertex_count {
            return Err(Error::Mismatch("motion shapes differ".into()));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in self.displacements.iter().zip(&reference.displacements) {
            num += (a - b).norm_squared();
            den += b.norm_squared();
        }
        Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
    }
}
