//! Splat PLY interchange in the layout common to Gaussian-splat viewers:
//! binary little-endian vertices with `x y z f_dc_0..2 opacity scale_0..2
//! rot_0..3`, scales as natural logs, opacity as a logit, color as the
//! zeroth spherical-harmonic coefficient, rotation as `w x y z`.

use std::path::Path;

use super::{GaussianCloud, SplatPose};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::ply;

/// Zeroth-order real spherical-harmonic constant, `1 / (2√π)`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
/// Opacities are clamped below 1 so their logit stays finite.
const MAX_OPACITY: f64 = 0.9999;

const FIELDS: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
    "rot_3",
];

/// One decoded splat, in linear (not log/logit) units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatRecord {
    pub mean: Vec3,
    pub color: [f64; 3],
    pub opacity: f64,
    pub scale: Vec3,
    /// `(w, x, y, z)`.
    pub rotation: [f64; 4],
}

fn logit(p: f64) -> f64 {
    let p = p.min(MAX_OPACITY);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn encode_splats(cloud: &GaussianCloud, pose: &SplatPose) -> Result<Vec<u8>> {
    if pose.len() != cloud.len() {
        return Err(Error::Mismatch(format!(
            "pose of {} primitives for a cloud of {}",
            pose.len(),
            cloud.len()
        )));
    }
    let props: Vec<String> = FIELDS.iter().map(|f| format!("float {f}")).collect();
    let props: Vec<&str> = props.iter().map(String::as_str).collect();
    let header = ply::binary_header(&[("vertex", cloud.len(), &props)]);
    let mut out = Vec::with_capacity(header.len() + cloud.len() * FIELDS.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for i in 0..cloud.len() {
        let m = pose.means[i];
        let c = cloud.colors()[i];
        let s = pose.scales[i];
        let q = pose.quaternion(i);
        let row = [
            m.x,
            m.y,
            m.z,
            (c[0] - 0.5) / SH_C0,
            (c[1] - 0.5) / SH_C0,
            (c[2] - 0.5) / SH_C0,
            logit(cloud.opacity()[i]),
            s.x.ln(),
            s.y.ln(),
            s.z.ln(),
            q[0],
            q[1],
            q[2],
            q[3],
        ];
        for v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_splats(bytes: &[u8]) -> Result<Vec<SplatRecord>> {
    let data = ply::parse(bytes)?;
    let el = data
        .element("vertex")
        .ok_or_else(|| Error::parse("splat PLY", "no vertex element"))?;
    let cols = FIELDS
        .iter()
        .map(|f| {
            el.scalar(f)
                .ok_or_else(|| Error::parse("splat PLY", format!("missing property `{f}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..el.header.count)
        .map(|i| {
            let v = |c: usize| cols[c][i];
            SplatRecord {
                mean: Vec3::new(v(0), v(1), v(2)),
                color: [v(3) * SH_C0 + 0.5, v(4) * SH_C0 + 0.5, v(5) * SH_C0 + 0.5],
                opacity: sigmoid(v(6)),
                scale: Vec3::new(v(7).exp(), v(8).exp(), v(9).exp()),
                rotation: [v(10), v(11), v(12), v(13)],
            }
        })
        .collect())
}

pub fn export_splats(cloud: &GaussianCloud, pose: &SplatPose, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_splats(cloud, pose)?).map_err(|e| Error::file(path, e))
}

pub fn read_splats(path: impl AsRef<Path>) -> Result<Vec<SplatRecord>> {
    let path = path.as_ref();
    decode_splats(&std::fs::read(path).map_err(|e| Error::file(path, e))?)
}
