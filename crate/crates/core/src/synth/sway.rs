use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use super::{BranchSkeleton, Skinning, WindField};
use crate::error::{Error, Result};
use crate::geom::{rotation_from_vector, Mat3, Vec3};
use crate::mesh::{MotionSequence, TriMesh};

/// Bend angles and rates of every branch over time, frame-major. The trunk
/// entries are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SwayTrajectories {
    frames: usize,
    nodes: usize,
    fps: f64,
    angles: Vec<[f64; 2]>,
    rates: Vec<[f64; 2]>,
}

impl SwayTrajectories {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn angle(&self, frame: usize, node: usize) -> [f64; 2] {
        self.angles[frame * self.nodes + node]
    }

    pub fn rate(&self, frame: usize, node: usize) -> [f64; 2] {
        self.rates[frame * self.nodes + node]
    }

    /// Bend vector `θ_a·a + θ_b·b` (rest coordinates) of a node at a frame.
    pub fn bend_vector(&self, skeleton: &BranchSkeleton, frame: usize, node: usize) -> Vec3 {
        let [ta, tb] = self.angle(frame, node);
        let [a, b] = skeleton.nodes[node].bend_axes;
        a * ta + b * tb
    }

    /// Oscillator energy `Σ ½I|θ̇|² + ½k|θ|²` at a frame.
    pub fn energy(&self, skeleton: &BranchSkeleton, frame: usize) -> f64 {
        skeleton
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let [ta, tb] = self.angle(frame, i);
                let [va, vb] = self.rate(frame, i);
                0.5 * n.inertia * (va * va + vb * vb) + 0.5 * n.stiffness * (ta * ta + tb * tb)
            })
            .sum()
    }

    /// Largest angular speed over all branches and frames.
    pub fn max_rate(&self) -> f64 {
        self.rates
            .iter()
            .map(|[a, b]| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Integrate every non-trunk branch with semi-implicit Euler at `dt = 1/fps`:
/// `I θ̈ = τ_wind − k θ − c θ̇` per bend axis, starting at rest.
///
/// The wind torque on a branch is `½·s|s|·(L·2r)·(d × ŵ)` projected on its
/// bend axes, where `d` and the axes are the branch's rest directions
/// carried by the parent's current rotation; each branch's own equation is
/// therefore linear. Fails if any `dt·√(k/I) ≥ 2`, or if a branch bends past
/// a right angle.
pub fn simulate_wind(skeleton: &BranchSkeleton, wind: &WindField, frames: usize, fps: f64) -> Result<SwayTrajectories> {
    skeleton.validate()?;
    wind.validate()?;
    if frames < 2 {
        return Err(Error::InvalidArgument(format!("simulation needs at least 2 frames, got {frames}")));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
    }
    let dt = 1.0 / fps;
    for (i, n) in skeleton.nodes.iter().enumerate().skip(1) {
        let product = dt * n.natural_frequency();
        if product >= 2.0 {
            return Err(Error::StabilityGuard(format!(
                "node {i}: dt·√(k/I) = {product:.4} ≥ 2 at {fps} fps"
            )));
        }
    }
    let n = skeleton.node_count();
    let w_hat = wind.unit_direction();
    let gusts = wind.gusts.len();
    let offsets = wind.phase_offsets(n);
    let mut theta = vec![[0.0f64; 2]; n];
    let mut rate = vec![[0.0f64; 2]; n];
    let mut world = vec![Mat3::identity(); n];
    let mut angles = Vec::with_capacity(frames * n);
    let mut rates = Vec::with_capacity(frames * n);
    angles.extend_from_slice(&theta);
    rates.extend_from_slice(&rate);
    for frame in 1..frames {
        let t = (frame - 1) as f64 * dt;
        for (i, node) in skeleton.nodes.iter().enumerate().skip(1) {
            let parent_rot = world[node.parent.expect("validated: non-root has a parent")];
            let s = wind.speed_at(t, &offsets[i * gusts..(i + 1) * gusts]);
            let d = parent_rot * node.direction;
            let torque = d.cross(&w_hat) * (0.5 * s * s.abs() * node.drag_area());
            for axis in 0..2 {
                let tau = torque.dot(&(parent_rot * node.bend_axes[axis]));
                let accel = (tau - node.stiffness * theta[i][axis] - node.damping * rate[i][axis]) / node.inertia;
                rate[i][axis] += dt * accel;
                theta[i][axis] += dt * rate[i][axis];
            }
            let magnitude = theta[i][0].hypot(theta[i][1]);
            if magnitude.is_nan() || magnitude > FRAC_PI_2 {
                return Err(Error::Unstable {
                    node: i,
                    frame,
                    angle: magnitude,
                });
            }
            let [a, b] = node.bend_axes;
            world[i] = parent_rot * rotation_from_vector(&(a * theta[i][0] + b * theta[i][1]));
        }
        angles.extend_from_slice(&theta);
        rates.extend_from_slice(&rate);
    }
    Ok(SwayTrajectories {
        frames,
        nodes: n,
        fps,
        angles,
        rates,
    })
}

/// Rigidly carry every vertex with its branch (composed down the
/// hierarchy), plus leaf flutter about each leaf hinge.
///
/// Displacements are accumulated as differences from the rest pose, so a
/// branch whose composed rotation is exactly the identity contributes an
/// exactly zero displacement.
pub fn skin_motion(
    skeleton: &BranchSkeleton,
    trajectories: &SwayTrajectories,
    mesh: &TriMesh,
    skinning: &Skinning,
) -> Result<MotionSequence> {
    let n = skeleton.node_count();
    if trajectories.node_count() != n {
        return Err(Error::Mismatch(format!(
            "trajectories cover {} nodes, skeleton has {n}",
            trajectories.node_count()
        )));
    }
    if skinning.node.len() != mesh.vertex_count() || skinning.leaf.len() != mesh.vertex_count() {
        return Err(Error::Mismatch(format!(
            "skinning covers {} vertices, mesh has {}",
            skinning.node.len(),
            mesh.vertex_count()
        )));
    }
    if let Some(v) = skinning.node.iter().position(|&i| i as usize >= n) {
        return Err(Error::InvalidArgument(format!(
            "vertex {v} skinned to node {} of {n}",
            skinning.node[v]
        )));
    }
    if let Some(v) = skinning
        .leaf
        .iter()
        .position(|l| l.is_some_and(|l| l as usize >= skeleton.leaves.len()))
    {
        return Err(Error::InvalidArgument(format!("vertex {v} skinned to a missing leaf")));
    }
    let frames = trajectories.frames();
    let fps = trajectories.fps();
    let verts = mesh.vertices();
    let per_frame: Vec<Vec<Vec3>> = (0..frames)
        .into_par_iter()
        .map(|f| {
            // Composed rotation R_i and base displacement U_i of each node.
            let mut rot = vec![Mat3::identity(); n];
            let mut shift = vec![Vec3::zeros(); n];
            for (i, node) in skeleton.nodes.iter().enumerate() {
                if let Some(p) = node.parent {
                    let own = rotation_from_vector(&trajectories.bend_vector(skeleton, f, i));
                    shift[i] = shift[p] + (rot[p] - Mat3::identity()) * (node.base - skeleton.nodes[p].base);
                    rot[i] = rot[p] * own;
                }
            }
            let t = f as f64 / fps;
            let flutter: Vec<Mat3> = skeleton
                .leaves
                .iter()
                .map(|l| rotation_from_vector(&(l.axis * skeleton.flutter.angle(t, l.phase))) - Mat3::identity())
                .collect();
            verts
                .iter()
                .zip(&skinning.node)
                .zip(&skinning.leaf)
                .map(|((v, &i), leaf)| {
                    let i = i as usize;
                    let base = skeleton.nodes[i].base;
                    let mut d = shift[i] + (rot[i] - Mat3::identity()) * (v - base);
                    if let Some(l) = leaf {
                        let l = *l as usize;
                        d += rot[i] * (flutter[l] * (v - skeleton.leaves[l].anchor));
                    }
                    d
                })
                .collect()
        })
        .collect();
    MotionSequence::new(frames, mesh.vertex_count(), fps, per_frame.into_iter().flatten().collect())
}
