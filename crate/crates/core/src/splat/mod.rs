//! Gaussian primitives bound to mesh faces.
//!
//! Each primitive sits at fixed barycentric weights on its host face. Its
//! frame follows the face: first axis along the unit normal, second toward
//! the first vertex within the face plane, third their cross product. Scales
//! are a thin constant along the normal and fixed fractions of in-plane
//! distances, so a rigid motion of the face moves the primitive rigidly.

mod io;

pub use io::{decode_splats, encode_splats, export_splats, read_splats, SplatRecord, SH_C0};

use nalgebra::{Rotation3, UnitQuaternion};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Vec3, MIN_FACE_AREA};
use crate::mesh::TriMesh;

pub const DEFAULT_PER_FACE: usize = 5;
/// Primitives per parallel work item in [`GaussianCloud::pose_into`].
const POSE_CHUNK: usize = 8192;
/// In-plane scale factors β₂, β₃.
pub const TANGENT_SCALE: f64 = 0.3;
/// Normal thickness as a fraction of the rest bounding-box diagonal.
pub const NORMAL_THICKNESS: f64 = 1e-4;
pub const DEFAULT_COLOR: [f64; 3] = [0.5, 0.5, 0.5];

/// Stratified barycentric sites; a count `c ≤ 5` takes the first `c`.
pub const SITES: [[f64; 3]; 5] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.6, 0.2, 0.2],
    [0.2, 0.6, 0.2],
    [0.2, 0.2, 0.6],
    [0.4, 0.4, 0.2],
];

/// Barycentric site `i` of a face carrying more than five primitives.
/// Beyond the fixed table, sites follow a 2-D additive recurrence folded
/// into the triangle and pulled 10% toward the centroid, so they stay
/// strictly interior.
fn site(i: usize) -> [f64; 3] {
    if i < SITES.len() {
        return SITES[i];
    }
    // Plastic-number recurrence: well-spread points in the unit square.
    const G: f64 = 1.324_717_957_244_746;
    let j = (i - SITES.len() + 1) as f64;
    let mut u = (0.5 + j / G).fract();
    let mut v = (0.5 + j / (G * G)).fract();
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    let w = [1.0 - u - v, u, v];
    let c = 1.0 / 3.0;
    [0.9 * w[0] + 0.1 * c, 0.9 * w[1] + 0.1 * c, 1.0 - (0.9 * (w[0] + w[1]) + 0.2 * c)]
}

/// Per-frame attributes of every primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatPose {
    pub means: Vec<Vec3>,
    /// Columns: unit normal, in-plane axis toward V₁, their cross product.
    pub rotations: Vec<Mat3>,
    pub scales: Vec<Vec3>,
    /// True where the host face was degenerate and the previous pose was kept.
    pub frozen: Vec<bool>,
}

impl SplatPose {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    /// Rotation of primitive `i` as a unit quaternion `(w, x, y, z)`, `w ≥ 0`.
    pub fn quaternion(&self, i: usize) -> [f64; 4] {
        quaternion_wxyz(&self.rotations[i])
    }
}

/// Change from one pose to another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatDelta {
    pub dx: Vec3,
    /// Unit quaternion `(w, x, y, z)` of `R'·Rᵀ`, `w ≥ 0`.
    pub dr: [f64; 4],
    pub ds: Vec3,
}

/// Unit quaternion `(w, x, y, z)` of a rotation matrix, sign fixed so `w ≥ 0`.
pub fn quaternion_wxyz(m: &Mat3) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    faces: Vec<[u32; 3]>,
    vertex_count: usize,
    /// Host face of each primitive; primitives of a face are contiguous.
    face_of: Vec<u32>,
    /// First primitive of each face, plus the total at the end.
    face_start: Vec<u32>,
    /// Barycentric weights by slot within a face (`site(0..max count)`).
    sites: Vec<[f64; 3]>,
    opacity: Vec<f64>,
    color: Vec<[f64; 3]>,
    /// Normal thickness ε_n shared by all primitives.
    normal_scale: f64,
    /// In-plane factors β₂, β₃ shared by all primitives.
    tangent_scale: [f64; 2],
    rest: SplatPose,
}

impl GaussianCloud {
    /// `per_face` primitives on every face.
    pub fn bind(mesh: &TriMesh, per_face: usize) -> Result<Self> {
        Self::bind_with_counts(mesh, &vec![per_face; mesh.face_count()])
    }

    /// A chosen primitive count for each face.
    pub fn bind_with_counts(mesh: &TriMesh, counts: &[usize]) -> Result<Self> {
        if mesh.face_count() == 0 {
            return Err(Error::EmptyMesh);
        }
        if counts.len() != mesh.face_count() {
            return Err(Error::Mismatch(format!(
                "{} per-face counts for {} faces",
                counts.len(),
                mesh.face_count()
            )));
        }
        if let Some(f) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!("face {f} has a primitive count of 0")));
        }
        let total: usize = counts.iter().sum();
        if u32::try_from(total).is_err() {
            return Err(Error::InvalidArgument(format!("{total} primitives exceed the u32 index range")));
        }
        let mut face_of = Vec::with_capacity(total);
        let mut face_start = Vec::with_capacity(counts.len() + 1);
        for (f, &c) in counts.iter().enumerate() {
            face_start.push(face_of.len() as u32);
            face_of.resize(face_of.len() + c, f as u32);
        }
        face_start.push(total as u32);
        let sites = (0..counts.iter().copied().max().unwrap_or(0)).map(site).collect();
        let normal_scale = NORMAL_THICKNESS * mesh.aabb().diagonal();
        let mut cloud = Self {
            faces: mesh.faces().to_vec(),
            vertex_count: mesh.vertex_count(),
            face_of,
            face_start,
            sites,
            opacity: vec![1.0; total],
            color: vec![DEFAULT_COLOR; total],
            normal_scale: if normal_scale > 0.0 { normal_scale } else { NORMAL_THICKNESS },
            tangent_scale: [TANGENT_SCALE; 2],
            rest: SplatPose {
                means: vec![Vec3::zeros(); total],
                rotations: vec![Mat3::identity(); total],
                scales: vec![Vec3::zeros(); total],
                frozen: vec![false; total],
            },
        };
        let mut rest = cloud.rest.clone();
        cloud.pose_into(mesh.vertices(), &mut rest)?;
        rest.frozen.fill(false);
        cloud.rest = rest;
        Ok(cloud)
    }

    /// Per-primitive colors in `[0, 1]`.
    pub fn with_colors(mut self, colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.len() != self.len() {
            return Err(Error::Mismatch(format!("{} colors for {} primitives", colors.len(), self.len())));
        }
        self.color = colors;
        Ok(self)
    }

    /// Per-primitive opacities in `(0, 1]`.
    pub fn with_opacity(mut self, opacity: Vec<f64>) -> Result<Self> {
        if opacity.len() != self.len() {
            return Err(Error::Mismatch(format!("{} opacities for {} primitives", opacity.len(), self.len())));
        }
        if let Some(o) = opacity.iter().find(|&&o| !(o > 0.0 && o <= 1.0)) {
            return Err(Error::InvalidArgument(format!("opacity {o} outside (0, 1]")));
        }
        self.opacity = opacity;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.face_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face_of.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn face_of(&self, i: usize) -> usize {
        self.face_of[i] as usize
    }

    pub fn barycentric(&self, i: usize) -> [f64; 3] {
        let f = self.face_of[i] as usize;
        self.sites[i - self.face_start[f] as usize]
    }

    pub fn opacity(&self) -> &[f64] {
        &self.opacity
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.color
    }

    /// `(ε_n, β₂, β₃)`.
    pub fn scale_coefficients(&self) -> [f64; 3] {
        [self.normal_scale, self.tangent_scale[0], self.tangent_scale[1]]
    }

    pub fn rest_pose(&self) -> &SplatPose {
        &self.rest
    }

    /// Pose on a deformed copy of the binding mesh.
    pub fn pose(&self, vertices: &[Vec3]) -> Result<SplatPose> {
        let mut out = self.rest.clone();
        self.pose_into(vertices, &mut out)?;
        Ok(out)
    }

    /// Pose into preallocated buffers. A primitive whose face is degenerate
    /// in `vertices` keeps whatever `out` already holds for it (its last
    /// valid pose) and is flagged frozen.
    pub fn pose_into(&self, vertices: &[Vec3], out: &mut SplatPose) -> Result<()> {
        if vertices.len() != self.vertex_count {
            return Err(Error::Mismatch(format!(
                "{} deformed vertices for a binding mesh of {}",
                vertices.len(),
                self.vertex_count
            )));
        }
        let n = self.len();
        if out.means.len() != n || out.rotations.len() != n || out.scales.len() != n || out.frozen.len() != n {
            return Err(Error::Mismatch(format!("pose buffers do not hold {n} primitives")));
        }
        let eps = self.normal_scale;
        let [b2, b3] = self.tangent_scale;
        let (faces, face_start, sites) = (&self.faces, &self.face_start, &self.sites);
        // Primitives of a face are contiguous, so each chunk computes a face's
        // corners and normal once and reuses them for its run of primitives.
        (
            out.means.par_chunks_mut(POSE_CHUNK),
            out.rotations.par_chunks_mut(POSE_CHUNK),
            out.scales.par_chunks_mut(POSE_CHUNK),
            out.frozen.par_chunks_mut(POSE_CHUNK),
            self.face_of.par_chunks(POSE_CHUNK),
        )
            .into_par_iter()
            .enumerate()
            .for_each(|(chunk, (means, rots, scales, frozen, face_of))| {
                let first = chunk * POSE_CHUNK;
                let mut cached = u32::MAX;
                let mut start = 0usize;
                let (mut v1, mut a, mut b, mut r1) = (Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
                let mut flat = true;
                for i in 0..means.len() {
                    let f = face_of[i];
                    if f != cached {
                        cached = f;
                        start = face_start[f as usize] as usize;
                        let [i1, i2, i3] = faces[f as usize];
                        v1 = vertices[i1 as usize];
                        a = vertices[i2 as usize] - v1;
                        b = vertices[i3 as usize] - v1;
                        let normal = a.cross(&b);
                        let norm = normal.norm();
                        flat = norm.is_nan() || 0.5 * norm < MIN_FACE_AREA;
                        r1 = normal * norm.recip();
                    }
                    if flat {
                        frozen[i] = true;
                        continue;
                    }
                    let w = sites[first + i - start];
                    // V₁ − μ = −(w₂·a + w₃·b) is a combination of the face
                    // edges, so it already lies in the face plane.
                    let e = -(a * w[1] + b * w[2]);
                    let e_norm = e.norm();
                    if e_norm.is_nan() || e_norm <= 0.0 {
                        frozen[i] = true;
                        continue;
                    }
                    let r2 = e * e_norm.recip();
                    let r3 = r1.cross(&r2);
                    means[i] = v1 - e;
                    rots[i] = Mat3::from_columns(&[r1, r2, r3]);
                    scales[i] = Vec3::new(eps, b2 * e_norm, b3 * (a + e).dot(&r3).abs());
                    frozen[i] = false;
                }
            });
        Ok(())
    }

    /// Per-primitive change from `rest` to `deformed`.
    pub fn deform_deltas(&self, rest: &SplatPose, deformed: &SplatPose) -> Result<Vec<SplatDelta>> {
        if rest.len() != self.len() || deformed.len() != self.len() {
            return Err(Error::Mismatch(format!(
                "poses of {} and {} primitives for a cloud of {}",
                rest.len(),
                deformed.len(),
                self.len()
            )));
        }
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| SplatDelta {
                dx: deformed.means[i] - rest.means[i],
                dr: quaternion_wxyz(&(deformed.rotations[i] * rest.rotations[i].transpose())),
                ds: deformed.scales[i] - rest.scales[i],
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> TriMesh {
        TriMesh::new(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn sites_are_convex_weights() {
        for i in 0..64 {
            let w = site(i);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{i}: {w:?}");
            assert!(w.iter().all(|&x| x > 0.0), "{i}: {w:?}");
        }
    }

    #[test]
    fn centroid_binding() {
        let m = triangle();
        let c = GaussianCloud::bind(&m, 1).unwrap();
        assert_eq!(c.len(), 1);
        let mu = c.rest_pose().means[0];
        assert!((mu - Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < 1e-15);
        let r = c.rest_pose().rotations[0];
        assert!((r.column(0) - Vec3::z()).norm() < 1e-15);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(c.rest_pose().scales[0].iter().all(|&s| s > 0.0));
    }

    #[test]
    fn counts_and_errors() {
        let m = triangle();
        assert_eq!(GaussianCloud::bind(&m, 5).unwrap().len(), 5);
        assert_eq!(GaussianCloud::bind(&m, 9).unwrap().len(), 9);
        assert!(GaussianCloud::bind(&m, 0).is_err());
        let c = GaussianCloud::bind(&m, 2).unwrap();
        assert!(c.pose(&[Vec3::zeros()]).is_err());
    }

    #[test]
    fn degenerate_face_freezes() {
        let m = triangle();
        let c = GaussianCloud::bind(&m, 5).unwrap();
        let flat = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        let p = c.pose(&flat).unwrap();
        assert_eq!(p.frozen_count(), 5);
        assert_eq!(p.means, c.rest_pose().means);
    }

    #[test]
    fn quarter_turn_delta() {
        let m = triangle();
        let c = GaussianCloud::bind(&m, 1).unwrap();
        let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
        let moved: Vec<Vec3> = m.vertices().iter().map(|v| rot * v).collect();
        let p = c.pose(&moved).unwrap();
        let d = c.deform_deltas(c.rest_pose(), &p).unwrap()[0];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in d.dr.iter().zip([h, 0.0, 0.0, h]) {
            assert!((a - b).abs() < 1e-9, "{:?}", d.dr);
        }
        assert!(d.ds.norm() < 1e-12);
    }
}
