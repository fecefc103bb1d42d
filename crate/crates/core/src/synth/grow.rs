use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthParams;
use crate::error::{Error, Result};
use crate::geom::{any_perpendicular, Vec3};
use crate::mesh::TriMesh;

/// One branch: a straight segment from `base` along `direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchNode {
    /// `None` for the trunk.
    pub parent: Option<usize>,
    /// 0 for the trunk.
    pub level: usize,
    pub base: Vec3,
    /// Unit rest direction.
    pub direction: Vec3,
    pub length: f64,
    pub radius: f64,
    /// Angular stiffness, torque per radian.
    pub stiffness: f64,
    /// Angular damping, torque per rad/s.
    pub damping: f64,
    /// Rotational inertia about the base.
    pub inertia: f64,
    /// Two unit axes perpendicular to `direction` (and to each other) about
    /// which the branch bends, in rest coordinates.
    pub bend_axes: [Vec3; 2],
}

impl BranchNode {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        parent: Option<usize>,
        level: usize,
        base: Vec3,
        direction: Vec3,
        length: f64,
        radius: f64,
        stiffness: f64,
        damping: f64,
        inertia: f64,
    ) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidArgument("branch direction must be non-zero".into()));
        }
        let direction = direction / norm;
        let a = any_perpendicular(&direction);
        let b = direction.cross(&a);
        Ok(Self {
            parent,
            level,
            base,
            direction,
            length,
            radius,
            stiffness,
            damping,
            inertia,
            bend_axes: [a, b],
        })
    }

    pub fn tip(&self) -> Vec3 {
        self.base + self.direction * self.length
    }

    /// Undamped natural angular frequency `√(k/I)`.
    pub fn natural_frequency(&self) -> f64 {
        (self.stiffness / self.inertia).sqrt()
    }

    /// Wind-facing area, length × diameter.
    pub fn drag_area(&self) -> f64 {
        self.length * 2.0 * self.radius
    }
}

/// A quad leaf hinged on its near edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafCard {
    pub node: usize,
    /// Hinge midpoint, in rest coordinates.
    pub anchor: Vec3,
    /// Unit hinge axis.
    pub axis: Vec3,
    pub size: f64,
    /// Flutter phase (rad).
    pub phase: f64,
}

impl LeafCard {
    /// Hinge position relative to the owning branch base.
    pub fn offset(&self, skeleton: &BranchSkeleton) -> Vec3 {
        self.anchor - skeleton.nodes[self.node].base
    }
}

/// Leaf flutter: each leaf turns about its hinge by
/// `amplitude·(sin(2πft + φ) − sin φ)`, zero at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flutter {
    pub amplitude: f64,
    pub frequency_hz: f64,
}

impl Flutter {
    pub fn angle(&self, t: f64, phase: f64) -> f64 {
        self.amplitude * ((TAU * self.frequency_hz * t + phase).sin() - phase.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSkeleton {
    pub nodes: Vec<BranchNode>,
    pub leaves: Vec<LeafCard>,
    pub flutter: Flutter,
}

impl BranchSkeleton {
    pub fn new(nodes: Vec<BranchNode>, leaves: Vec<LeafCard>, flutter: Flutter) -> Result<Self> {
        let s = Self { nodes, leaves, flutter };
        s.validate()?;
        Ok(s)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.nodes.first().map_or(true, |n| n.parent.is_some()) {
            return bad("the first node must be the single root".into());
        }
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            match n.parent {
                Some(p) if p < i => {}
                _ => return bad(format!("node {i} must have a parent with a lower index")),
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for (name, v) in [
                ("length", n.length),
                ("radius", n.radius),
                ("stiffness", n.stiffness),
                ("damping", n.damping),
                ("inertia", n.inertia),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("node {i}: {name} must be positive, got {v}"));
                }
            }
        }
        if let Some(l) = self.leaves.iter().find(|l| l.node >= self.nodes.len()) {
            return bad(format!("leaf attached to missing node {}", l.node));
        }
        if !(self.flutter.amplitude >= 0.0 && self.flutter.frequency_hz > 0.0) {
            return bad("flutter needs amplitude ≥ 0 and frequency > 0".into());
        }
        Ok(())
    }
}

/// Owning branch (and leaf, if any) of every mesh vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skinning {
    pub node: Vec<u32>,
    pub leaf: Vec<Option<u32>>,
}

impl Skinning {
    pub fn len(&self) -> usize {
        self.node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_empty()
    }
}

/// Mechanical constants for a branch: stiffness giving `rest_deflection`
/// under the reference wind, inertia giving a natural frequency that rises
/// by `frequency_growth` per level, and the configured damping ratio.
fn mechanics(params: &SynthParams, level: usize, length: f64, radius: f64) -> (f64, f64, f64) {
    let torque = 0.5 * params.reference_wind_speed.powi(2) * length * 2.0 * radius;
    let k = torque / params.rest_deflection;
    let f = params.base_frequency_hz * params.frequency_growth.powi(level as i32 - 1);
    let omega = TAU * f;
    let inertia = k / (omega * omega);
    let c = 2.0 * params.damping_ratio * (k * inertia).sqrt();
    (k, c, inertia)
}

/// Grow a tree breadth-first from a vertical trunk. Deterministic in the
/// parameters (including the seed).
pub fn grow_tree(params: &SynthParams) -> Result<(BranchSkeleton, TriMesh, Skinning)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let up = Vec3::new(0.0, 1.0, 0.0);
    let (k, c, i) = mechanics(params, 0, params.trunk_length, params.trunk_radius);
    let mut nodes = vec![BranchNode::new(
        None,
        0,
        Vec3::zeros(),
        up,
        params.trunk_length,
        params.trunk_radius,
        k,
        c,
        i,
    )?];
    let mut queue = VecDeque::from([0usize]);
    while let Some(p) = queue.pop_front() {
        let parent = nodes[p].clone();
        if parent.level + 1 >= params.depth {
            continue;
        }
        let [bmin, bmax] = params.branches_per_node;
        let count = rng.random_range(bmin..=bmax);
        let roll = rng.random_range(0.0..TAU);
        let [amin, amax] = params.branch_angle_deg;
        for j in 0..count {
            let azimuth = roll + TAU * j as f64 / count as f64 + rng.random_range(-0.4..0.4);
            let polar = rng.random_range(amin..=amax).to_radians();
            let [u, w] = parent.bend_axes;
            let out = u * azimuth.cos() + w * azimuth.sin();
            let direction = parent.direction * polar.cos() + out * polar.sin();
            let attach = rng.random_range(0.55..=1.0);
            let length = parent.length * params.length_decay * rng.random_range(0.85..=1.0);
            let radius = parent.radius * params.radius_decay;
            let level = parent.level + 1;
            let (k, c, i) = mechanics(params, level, length, radius);
            nodes.push(BranchNode::new(
                Some(p),
                level,
                parent.base + parent.direction * (attach * parent.length),
                direction,
                length,
                radius,
                k,
                c,
                i,
            )?);
            queue.push_back(nodes.len() - 1);
        }
    }

    let mut has_child = vec![false; nodes.len()];
    for n in &nodes {
        if let Some(p) = n.parent {
            has_child[p] = true;
        }
    }
    let mut leaves = Vec::new();
    for (idx, n) in nodes.iter().enumerate() {
        if n.parent.is_none() || has_child[idx] {
            continue;
        }
        for _ in 0..params.leaves_per_terminal {
            let s = rng.random_range(0.5..=1.0);
            let az = rng.random_range(0.0..TAU);
            let [u, w] = n.bend_axes;
            let out = u * az.cos() + w * az.sin();
            leaves.push(LeafCard {
                node: idx,
                anchor: n.base + n.direction * (s * n.length),
                axis: out.cross(&n.direction).normalize(),
                size: params.leaf_size,
                phase: rng.random_range(0.0..TAU),
            });
        }
    }

    let skeleton = BranchSkeleton::new(
        nodes,
        leaves,
        Flutter {
            amplitude: params.flutter_amplitude,
            frequency_hz: params.flutter_hz,
        },
    )?;
    let (mesh, skinning) = build_mesh(&skeleton, params.radial_segments, params.radius_decay)?;
    Ok((skeleton, mesh, skinning))
}

/// Tapered open cylinder per branch plus one quad per leaf.
fn build_mesh(skeleton: &BranchSkeleton, segments: usize, taper: f64) -> Result<(TriMesh, Skinning)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut node_of = Vec::new();
    let mut leaf_of = Vec::new();
    for (idx, n) in skeleton.nodes.iter().enumerate() {
        let first = vertices.len() as u32;
        let [u, w] = n.bend_axes;
        for (center, r) in [(n.base, n.radius), (n.tip(), n.radius * taper)] {
            for j in 0..segments {
                let a = TAU * j as f64 / segments as f64;
                vertices.push(center + (u * a.cos() + w * a.sin()) * r);
                node_of.push(idx as u32);
                leaf_of.push(None);
            }
        }
        let s = segments as u32;
        for j in 0..s {
            let (b0, b1) = (first + j, first + (j + 1) % s);
            let (t0, t1) = (b0 + s, b1 + s);
            faces.push([b0, b1, t1]);
            faces.push([b0, t1, t0]);
        }
    }
    for (li, leaf) in skeleton.leaves.iter().enumerate() {
        let n = &skeleton.nodes[leaf.node];
        let blade = leaf.axis.cross(&n.direction).normalize() * -1.0;
        // Lean the blade half-way toward the branch tip.
        let reach = (blade + n.direction * 0.5).normalize() * leaf.size;
        let half = leaf.axis * (0.25 * leaf.size);
        let first = vertices.len() as u32;
        for p in [
            leaf.anchor - half,
            leaf.anchor + half,
            leaf.anchor + reach + half,
            leaf.anchor + reach - half,
        ] {
            vertices.push(p);
            node_of.push(leaf.node as u32);
            leaf_of.push(Some(li as u32));
        }
        faces.push([first, first + 1, first + 2]);
        faces.push([first, first + 2, first + 3]);
    }
    let mesh = TriMesh::new(vertices, faces)?;
    Ok((mesh, Skinning { node: node_of, leaf: leaf_of }))
}
