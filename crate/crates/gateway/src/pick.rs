use spectree_core::geom::ray_triangle;
use spectree_core::{SparseVoxelGrid, TriMesh, Vec3};

/// The first surface point along a pick ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickHit {
    pub face: usize,
    /// The face corner closest to the hit point.
    pub vertex: usize,
    /// The voxel holding `vertex`.
    pub voxel: usize,
    /// Ray parameter in units of the (normalized) direction.
    pub distance: f64,
    pub point: Vec3,
}

/// Intersect a ray with the rest mesh and map the nearest hit to a voxel.
///
/// The direction is normalized here; a zero or non-finite ray never hits.
pub fn resolve_pick(origin: &Vec3, direction: &Vec3, mesh: &TriMesh, grid: &SparseVoxelGrid) -> Option<PickHit> {
    let norm = direction.norm();
    if !(norm.is_finite() && norm > 0.0) || !origin.iter().all(|c| c.is_finite()) {
        return None;
    }
    let dir = direction / norm;
    // Pad the box so hits on flat meshes are not rejected by rounding.
    let mut bounds = mesh.aabb();
    let pad = Vec3::repeat(1e-9 * bounds.diagonal().max(1.0));
    bounds.min -= pad;
    bounds.max += pad;
    bounds.ray_interval(origin, &dir)?;

    let (face, distance) = mesh
        .faces()
        .iter()
        .enumerate()
        .filter_map(|(f, _)| {
            let [a, b, c] = mesh.face_vertices(f);
            ray_triangle(origin, &dir, &a, &b, &c).map(|t| (f, t))
        })
        .min_by(|x, y| x.1.total_cmp(&y.1))?;
    let point = origin + dir * distance;
    let vertex = mesh.faces()[face]
        .iter()
        .map(|&v| v as usize)
        .min_by(|&u, &v| {
            let du = (mesh.vertices()[u] - point).norm_squared();
            let dv = (mesh.vertices()[v] - point).norm_squared();
            du.total_cmp(&dv).then(u.cmp(&v))
        })
        .expect("three corners");
    Some(PickHit {
        face,
        vertex,
        voxel: grid.vertex_to_voxel()[vertex] as usize,
        distance,
        point,
    })
}
