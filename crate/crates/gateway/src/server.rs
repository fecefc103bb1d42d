use std::future::Future;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::stream::{SplitSink, StreamExt};
use futures::SinkExt;
use serde::{Deserialize, Serialize};
use spectree_core::engine::MetricsReport;
use spectree_core::{LiveSession, Vec3};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::pick::resolve_pick;
use crate::protocol::{encode_frame, ClientMessage, Pick, ServerMessage, WireForce, PROTOCOL_VERSION};

/// Close code sent with protocol violations (RFC 6455 "policy violation").
const CLOSE_POLICY: u16 = 1008;
/// Control replies queued per client before the reader waits.
const CONTROL_QUEUE: usize = 32;

#[derive(Clone)]
struct AppState {
    session: Arc<LiveSession>,
    clients: Arc<AtomicUsize>,
}

/// Body of `GET /metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayMetrics {
    #[serde(flatten)]
    pub session: MetricsReport,
    /// Open viewer connections.
    pub clients: usize,
}

/// Routes: `GET /health`, `GET /snapshot`, `GET /metrics`, `GET /ws`.
pub fn router(session: Arc<LiveSession>) -> Router {
    let state = AppState {
        session,
        clients: Arc::new(AtomicUsize::new(0)),
    };
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/snapshot", get(snapshot))
        .route("/metrics", get(metrics))
        .route("/ws", get(upgrade))
        .with_state(state)
}

/// Serve `session` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    session: Arc<LiveSession>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("gateway listening on {addr}");
    }
    axum::serve(listener, router(session)).with_graceful_shutdown(shutdown).await
}

async fn snapshot(State(state): State<AppState>) -> Response {
    Json(state.session.snapshot().as_ref()).into_response()
}

async fn metrics(State(state): State<AppState>) -> Json<GatewayMetrics> {
    Json(GatewayMetrics {
        session: state.session.metrics(),
        clients: state.clients.load(Ordering::Relaxed),
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

/// Control traffic from a client's reader to its writer.
enum Outgoing {
    Text(ServerMessage),
    /// Send the message, then close the connection.
    Fatal(ServerMessage),
}

struct ClientGuard(Arc<AtomicUsize>);

impl Drop for ClientGuard {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::Relaxed);
    }
}

async fn client(socket: WebSocket, state: AppState) {
    state.clients.fetch_add(1, Ordering::Relaxed);
    let _guard = ClientGuard(state.clients.clone());
    let (sink, mut stream) = socket.split();
    let (control, queue) = mpsc::channel(CONTROL_QUEUE);
    // Queued before the writer starts, so `hello` precedes the first frame.
    if control.send(Outgoing::Text(hello(&state.session))).await.is_err() {
        return;
    }
    let writer = tokio::spawn(write_loop(sink, state.session.clone(), queue));

    while let Some(msg) = stream.next().await {
        let reply = match msg {
            Ok(Message::Text(text)) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                Ok(msg) => handle(&state, msg).await,
                Err(e) => Outgoing::Fatal(error(None, format!("malformed message: {e}"))),
            },
            Ok(Message::Binary(_)) => Outgoing::Fatal(error(None, "binary messages are not accepted")),
            Ok(Message::Ping(_) | Message::Pong(_)) => continue,
            Ok(Message::Close(_)) | Err(_) => break,
        };
        let fatal = matches!(reply, Outgoing::Fatal(_));
        if control.send(reply).await.is_err() || fatal {
            break;
        }
    }
    drop(control);
    let _ = writer.await;
}

fn hello(session: &LiveSession) -> ServerMessage {
    let snap = session.snapshot();
    ServerMessage::Hello {
        version: PROTOCOL_VERSION,
        payload: snap.config.payload,
        vertex_count: snap.vertices.len(),
        splat_count: snap.splat_count,
        voxel_count: snap.voxel_count,
        dt: snap.config.dt,
    }
}

fn error(id: Option<u64>, message: impl Into<String>) -> ServerMessage {
    ServerMessage::Error {
        id,
        message: message.into(),
    }
}

async fn handle(state: &AppState, msg: ClientMessage) -> Outgoing {
    match msg {
        ClientMessage::Hello { version } if version == PROTOCOL_VERSION => Outgoing::Text(hello(&state.session)),
        ClientMessage::Hello { version } => Outgoing::Fatal(error(
            None,
            format!("protocol version {version} is not supported (server speaks {PROTOCOL_VERSION})"),
        )),
        ClientMessage::Snapshot => Outgoing::Text(ServerMessage::Snapshot {
            snapshot: Box::new(state.session.snapshot().as_ref().clone()),
        }),
        ClientMessage::Force(force) => Outgoing::Text(apply_force(&state.session, force).await),
    }
}

fn vec3(v: [f32; 3]) -> Vec3 {
    Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)
}

/// Resolve the pick, queue the force and wait for the simulation to stamp it.
pub async fn apply_force(session: &LiveSession, wire: WireForce) -> ServerMessage {
    let id = wire.id;
    if !(wire.duration > 0.0 && wire.duration.is_finite()) {
        return error(id, format!("duration must be positive and finite, got {}", wire.duration));
    }
    let voxel = match wire.pick {
        Pick::Voxel(v) => v as usize,
        Pick::Ray { origin, direction } => {
            match resolve_pick(&vec3(origin), &vec3(direction), session.mesh(), session.grid()) {
                Some(hit) => hit.voxel,
                None => return ServerMessage::Miss { id },
            }
        }
    };
    let pending = match session.submit_force(voxel, vec3(wire.force), wire.duration as f64) {
        Ok(rx) => rx,
        Err(e) => return error(id, e.to_string()),
    };
    match pending.await {
        Ok(Ok(event)) => ServerMessage::Ack {
            id,
            voxel: event.voxel as u32,
            force: event.force,
            t: event.start,
            duration: event.duration,
        },
        Ok(Err(e)) => error(id, e.to_string()),
        Err(_) => error(id, "simulation has stopped"),
    }
}

type Sink = SplitSink<WebSocket, Message>;

async fn send_json(sink: &mut Sink, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    sink.send(Message::Text(text.into())).await.is_ok()
}

/// Forward control replies and the latest frame; never waits on the
/// simulation, only on this client's socket.
async fn write_loop(mut sink: Sink, session: Arc<LiveSession>, mut queue: mpsc::Receiver<Outgoing>) {
    let mut frames = session.subscribe();
    frames.mark_changed();
    let mut last: Option<u32> = None;
    loop {
        tokio::select! {
            biased;
            out = queue.recv() => match out {
                Some(Outgoing::Text(msg)) => {
                    if !send_json(&mut sink, &msg).await {
                        return;
                    }
                }
                Some(Outgoing::Fatal(msg)) => {
                    let _ = send_json(&mut sink, &msg).await;
                    let _ = sink
                        .send(Message::Close(Some(CloseFrame {
                            code: CLOSE_POLICY,
                            reason: "protocol error".into(),
                        })))
                        .await;
                    return;
                }
                None => return,
            },
            changed = frames.changed() => {
                if changed.is_err() {
                    // The simulation ended.
                    let _ = sink.send(Message::Close(None)).await;
                    return;
                }
                let frame = frames.borrow_and_update().clone();
                let Some(frame) = frame else { continue };
                if last.is_some_and(|l| frame.index <= l) {
                    continue;
                }
                last = Some(frame.index);
                if sink.send(Message::Binary(encode_frame(&frame).into())).await.is_err() {
                    return;
                }
            }
        }
    }
}
