//! Wire formats shared with viewers.
//!
//! Frames travel as binary WebSocket messages:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SPTF"
//! 4       1     payload kind (0 = vertices, 1 = splats)
//! 5       3     zero padding
//! 8       4     frame index (u32)
//! 12      4     simulation time in seconds (f32)
//! 16      4·L   payload (f32 × L)
//! 16+4L   12    timings in ms: modal, devoxelize, pose (f32 × 3)
//! ```
//!
//! Everything is little-endian. Control messages are JSON text messages
//! tagged by `type`.

use serde::{Deserialize, Serialize};
use spectree_core::engine::{Frame, PayloadKind, SceneSnapshot};

/// Bumped whenever a wire format changes incompatibly.
pub const PROTOCOL_VERSION: u32 = 1;

pub const FRAME_MAGIC: [u8; 4] = *b"SPTF";
pub const HEADER_LEN: usize = 16;
/// Trailing per-frame timings (modal, devoxelize, pose).
pub const TIMINGS_LEN: usize = 12;
/// Floats per primitive in a splat payload: mean (3), quaternion `wxyz` (4), scale (3).
pub const SPLAT_FLOATS: usize = 10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("frame of {0} bytes is shorter than header and timings")]
    Truncated(usize),
    #[error("bad frame magic {0:?}")]
    Magic([u8; 4]),
    #[error("unknown payload kind {0}")]
    Kind(u8),
    #[error("payload of {bytes} bytes is not a whole number of f32")]
    Misaligned { bytes: usize },
    #[error("{kind:?} payload of {floats} floats does not match {expected}")]
    Length {
        kind: PayloadKind,
        floats: usize,
        expected: String,
    },
}

fn kind_code(kind: PayloadKind) -> u8 {
    match kind {
        PayloadKind::Vertices => 0,
        PayloadKind::Splats => 1,
    }
}

fn kind_from_code(code: u8) -> Result<PayloadKind, ProtocolError> {
    match code {
        0 => Ok(PayloadKind::Vertices),
        1 => Ok(PayloadKind::Splats),
        other => Err(ProtocolError::Kind(other)),
    }
}

/// Floats per item for a payload kind.
pub fn stride(kind: PayloadKind) -> usize {
    match kind {
        PayloadKind::Vertices => 3,
        PayloadKind::Splats => SPLAT_FLOATS,
    }
}

/// A decoded binary frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WireFrame {
    pub index: u32,
    pub time: f32,
    pub kind: PayloadKind,
    pub payload: Vec<f32>,
    /// Modal, devoxelize and pose time (ms).
    pub timings: [f32; 3],
}

impl WireFrame {
    pub fn from_frame(frame: &Frame) -> Self {
        Self {
            index: frame.index,
            time: frame.time as f32,
            kind: frame.kind,
            payload: frame.payload.clone(),
            timings: [
                frame.timings.modal_ms as f32,
                frame.timings.devoxelize_ms as f32,
                frame.timings.pose_ms as f32,
            ],
        }
    }

    /// Items in the payload (vertices or splats).
    pub fn items(&self) -> usize {
        self.payload.len() / stride(self.kind)
    }

    /// Check the payload length against the counts announced in a snapshot.
    pub fn check_counts(&self, snapshot: &SceneSnapshot) -> Result<(), ProtocolError> {
        let expected = match self.kind {
            PayloadKind::Vertices => snapshot.vertices.len(),
            PayloadKind::Splats => snapshot.splat_count,
        };
        if self.payload.len() != expected * stride(self.kind) {
            return Err(ProtocolError::Length {
                kind: self.kind,
                floats: self.payload.len(),
                expected: format!("{expected} items"),
            });
        }
        Ok(())
    }
}

/// Serialize an engine frame into one binary message.
pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let timings = [frame.timings.modal_ms, frame.timings.devoxelize_ms, frame.timings.pose_ms];
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * frame.payload.len() + TIMINGS_LEN);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&[kind_code(frame.kind), 0, 0, 0]);
    out.extend_from_slice(&frame.index.to_le_bytes());
    out.extend_from_slice(&(frame.time as f32).to_le_bytes());
    for v in &frame.payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in timings {
        out.extend_from_slice(&(t as f32).to_le_bytes());
    }
    out
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parse one binary message, checking the header and payload shape.
pub fn decode_frame(bytes: &[u8]) -> Result<WireFrame, ProtocolError> {
    if bytes.len() < HEADER_LEN + TIMINGS_LEN {
        return Err(ProtocolError::Truncated(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
    if magic != FRAME_MAGIC {
        return Err(ProtocolError::Magic(magic));
    }
    let kind = kind_from_code(bytes[4])?;
    let index = u32::from_le_bytes(bytes[8..12].try_into().expect("4-byte slice"));
    let time = f32_at(bytes, 12);
    let body = &bytes[HEADER_LEN..bytes.len() - TIMINGS_LEN];
    if body.len() % 4 != 0 {
        return Err(ProtocolError::Misaligned { bytes: body.len() });
    }
    let floats = body.len() / 4;
    if floats % stride(kind) != 0 {
        return Err(ProtocolError::Length {
            kind,
            floats,
            expected: format!("a multiple of {}", stride(kind)),
        });
    }
    let payload = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk"))).collect();
    let tail = bytes.len() - TIMINGS_LEN;
    Ok(WireFrame {
        index,
        time,
        kind,
        payload,
        timings: [f32_at(bytes, tail), f32_at(bytes, tail + 4), f32_at(bytes, tail + 8)],
    })
}

/// Where a force lands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    /// A voxel index, as listed in the snapshot.
    Voxel(u32),
    /// A ray tested against the rest mesh.
    Ray { origin: [f32; 3], direction: [f32; 3] },
}

/// A force as sent by a viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireForce {
    /// Echoed in the matching `ack`/`miss`/`error`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub pick: Pick,
    pub force: [f32; 3],
    /// Seconds; must be positive.
    pub duration: f32,
}

/// Text messages from a viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello { version: u32 },
    Snapshot,
    Force(WireForce),
}

/// Text messages to a viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Sent once on connect.
    Hello {
        version: u32,
        payload: PayloadKind,
        vertex_count: usize,
        splat_count: usize,
        voxel_count: usize,
        dt: f64,
    },
    Snapshot { snapshot: Box<SceneSnapshot> },
    /// The force was queued; it acts on every frame with `time > t`.
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        voxel: u32,
        /// Applied force, after the session's force scale.
        force: [f64; 3],
        t: f64,
        duration: f64,
    },
    /// The pick ray hit nothing.
    Miss {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        message: String,
    },
}
