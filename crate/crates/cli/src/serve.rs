use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;
use spectree_core::engine::{read_event_log, LiveOptions};
use spectree_core::spectrum::read_svsp;
use spectree_core::{load_mesh, Error, LiveSession, SessionConfig};
use tokio::net::TcpListener;

use crate::config::set;
use crate::ServeArgs;

/// First stdout line, so scripts can find a `--port 0` server.
#[derive(Serialize)]
struct Listening {
    listening: String,
}

/// Last stdout line.
#[derive(Serialize)]
struct Summary {
    frames: u64,
    sim_time: f64,
    events_applied: u64,
    late_frames: u64,
    last_frame: Option<u32>,
}

fn read_replay(path: &Path) -> anyhow::Result<Vec<spectree_core::ForceEvent>> {
    let file = fs::File::open(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })?;
    read_event_log(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

/// Resolves when the simulation thread has stopped on its own.
async fn session_finished(session: Arc<LiveSession>) {
    let mut frames = session.subscribe();
    while frames.changed().await.is_ok() {}
}

pub fn serve(base: &SessionConfig, args: ServeArgs) -> anyhow::Result<()> {
    let mut config = *base;
    set(&mut config.dt, args.dt);
    set(&mut config.xi, args.xi);
    set(&mut config.force_scale, args.force_scale);
    set(&mut config.integrator, args.integrator);
    set(&mut config.payload, args.payload);
    set(&mut config.per_face, args.per_face);

    let loaded = load_mesh(&args.mesh)?;
    let mesh = Arc::new(loaded.mesh);
    let spectrum = read_svsp(&args.spectrum)?
        .into_spectrum(&mesh)
        .with_context(|| format!("attaching {} to {}", args.spectrum.display(), args.mesh.display()))?;
    config.resolution = spectrum.grid().resolution();
    config.bins = spectrum.bins();
    config.fps = spectrum.fps();
    let replay = args.replay.as_deref().map(read_replay).transpose()?.unwrap_or_default();
    let options = LiveOptions {
        realtime: !args.no_realtime,
        max_frames: args.max_frames,
        replay,
        record: args.record.clone(),
    };
    let session = Arc::new(LiveSession::start(mesh, &spectrum, config, options)?);
    log::info!(
        "session: {} vertices, {} voxels, {} splats, dt = {} s, ω_max = {:.3} rad/s",
        session.snapshot().vertices.len(),
        session.snapshot().voxel_count,
        session.snapshot().splat_count,
        config.dt,
        session.snapshot().omega_max
    );

    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    let served = runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        println!("{}", serde_json::to_string(&Listening { listening: local.to_string() })?);
        let finished = session_finished(session.clone());
        spectree_gateway::serve(listener, session.clone(), async move {
            tokio::select! {
                _ = shutdown_signal() => log::info!("shutting down"),
                _ = finished => log::info!("simulation finished"),
            }
        })
        .await
        .context("serving")
    });
    // Open WebSocket tasks may still hold the session; do not wait for them.
    runtime.shutdown_background();
    session.stop();

    let metrics = session.metrics();
    let last = session.latest();
    if let (Some(path), Some(frame)) = (&args.final_frame, &last) {
        let bytes: Vec<u8> = frame.payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    served?;
    println!(
        "{}",
        serde_json::to_string(&Summary {
            frames: metrics.frames,
            sim_time: metrics.sim_time,
            events_applied: metrics.events_applied,
            late_frames: metrics.late_frames,
            last_frame: last.map(|f| f.index),
        })?
    );
    if let Some(err) = metrics.last_error {
        anyhow::bail!("simulation failed: {err}");
    }
    Ok(())
}
