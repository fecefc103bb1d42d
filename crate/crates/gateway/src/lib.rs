//! Network gateway for a live spectree session.
//!
//! One [`LiveSession`](spectree_core::LiveSession) is shared by every viewer.
//! Each WebSocket connection gets a writer task that forwards the latest
//! frame (skipping any it missed) and a reader task that turns force
//! messages into simulation events. Slow viewers only fall behind
//! themselves; the simulation never waits on the network.
//!
//! The wire format is described in [`protocol`] and `docs/protocol.md`.

pub mod pick;
pub mod protocol;
mod server;

pub use pick::{resolve_pick, PickHit};
pub use protocol::{
    decode_frame, encode_frame, ClientMessage, Pick, ProtocolError, ServerMessage, WireForce, WireFrame,
    PROTOCOL_VERSION,
};
pub use server::{apply_force, router, serve, GatewayMetrics};
