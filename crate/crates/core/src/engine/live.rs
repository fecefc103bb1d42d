use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::sync::{Arc, Mutex, PoisonError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, watch};

use super::bench::StageStats;
use super::interactive::{Frame, InteractiveSession, SceneSnapshot};
use super::log::EventRecorder;
use super::{FrameTimings, SessionConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::modal::ForceEvent;
use crate::spectrum::SparseVoxelSpectrum;
use crate::voxel::SparseVoxelGrid;

/// Timings kept for the rolling metrics.
const METRICS_WINDOW: usize = 256;

#[derive(Debug, Clone, Default)]
pub struct LiveOptions {
    /// Pace steps to wall-clock time (`dt` per step); otherwise run flat out.
    pub realtime: bool,
    /// Stop after this many steps.
    pub max_frames: Option<u64>,
    /// Events injected once the simulation clock reaches their start.
    pub replay: Vec<ForceEvent>,
    /// Append every applied event to this JSONL file.
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub running: bool,
    pub frames: u64,
    pub sim_time: f64,
    pub events_applied: u64,
    /// Steps that finished after their wall-clock deadline plus one step.
    pub late_frames: u64,
    pub last_error: Option<String>,
    pub modal: StageStats,
    pub devoxelize: StageStats,
    pub pose: StageStats,
    pub total: StageStats,
}

#[derive(Default)]
struct MetricsState {
    running: bool,
    frames: u64,
    sim_time: f64,
    events_applied: u64,
    late_frames: u64,
    last_error: Option<String>,
    window: VecDeque<FrameTimings>,
}

impl MetricsState {
    fn report(&self) -> MetricsReport {
        let stat = |f: fn(&FrameTimings) -> f64| StageStats::from_samples(&self.window.iter().map(f).collect::<Vec<_>>());
        MetricsReport {
            running: self.running,
            frames: self.frames,
            sim_time: self.sim_time,
            events_applied: self.events_applied,
            late_frames: self.late_frames,
            last_error: self.last_error.clone(),
            modal: stat(|t| t.modal_ms),
            devoxelize: stat(|t| t.devoxelize_ms),
            pose: stat(|t| t.pose_ms),
            total: stat(|t| t.total_ms),
        }
    }
}

enum Command {
    Force {
        voxel: usize,
        force: Vec3,
        duration: f64,
        reply: oneshot::Sender<Result<ForceEvent>>,
    },
    Stop,
}

/// An [`InteractiveSession`] stepping on a background thread.
///
/// Frames are published through a watch channel, so slow consumers only
/// ever see the latest one. Forces can be submitted from any thread; the
/// reply carries the event as stamped by the simulation.
pub struct LiveSession {
    commands: mpsc::Sender<Command>,
    frames: watch::Receiver<Option<Arc<Frame>>>,
    metrics: Arc<Mutex<MetricsState>>,
    snapshot: Arc<SceneSnapshot>,
    mesh: Arc<TriMesh>,
    grid: Arc<SparseVoxelGrid>,
    handle: Mutex<Option<JoinHandle<()>>>,
}

impl LiveSession {
    pub fn start(
        mesh: Arc<TriMesh>,
        spectrum: &SparseVoxelSpectrum,
        config: SessionConfig,
        options: LiveOptions,
    ) -> Result<Self> {
        let session = InteractiveSession::new(mesh.clone(), spectrum, config)?;
        let recorder = options.record.as_ref().map(EventRecorder::create).transpose()?;
        let snapshot = Arc::new(session.snapshot());
        let grid = session.grid().clone();
        let (cmd_tx, cmd_rx) = mpsc::channel();
        let (frame_tx, frame_rx) = watch::channel(None);
        let metrics = Arc::new(Mutex::new(MetricsState {
            running: true,
            ..MetricsState::default()
        }));
        let worker = Worker {
            session,
            commands: cmd_rx,
            frames: frame_tx,
            metrics: metrics.clone(),
            recorder,
            options,
        };
        let handle = std::thread::Builder::new()
            .name("spectree-sim".into())
            .spawn(move || worker.run())?;
        Ok(Self {
            commands: cmd_tx,
            frames: frame_rx,
            metrics,
            snapshot,
            mesh,
            grid,
            handle: Mutex::new(Some(handle)),
        })
    }

    pub fn snapshot(&self) -> &Arc<SceneSnapshot> {
        &self.snapshot
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn grid(&self) -> &Arc<SparseVoxelGrid> {
        &self.grid
    }

    /// A receiver that always holds the most recent frame.
    pub fn subscribe(&self) -> watch::Receiver<Option<Arc<Frame>>> {
        self.frames.clone()
    }

    pub fn latest(&self) -> Option<Arc<Frame>> {
        self.frames.borrow().clone()
    }

    pub fn metrics(&self) -> MetricsReport {
        self.metrics.lock().unwrap_or_else(PoisonError::into_inner).report()
    }

    pub fn is_running(&self) -> bool {
        self.metrics.lock().unwrap_or_else(PoisonError::into_inner).running
    }

    /// Queue a force; await the receiver for the stamped event.
    pub fn submit_force(
        &self,
        voxel: usize,
        force: Vec3,
        duration: f64,
    ) -> Result<oneshot::Receiver<Result<ForceEvent>>> {
        let (reply, rx) = oneshot::channel();
        self.commands
            .send(Command::Force {
                voxel,
                force,
                duration,
                reply,
            })
            .map_err(|_| Error::InvalidArgument("simulation has stopped".into()))?;
        Ok(rx)
    }

    /// [`Self::submit_force`] and wait for the reply. Must not be called
    /// from inside an async runtime.
    pub fn apply_force(&self, voxel: usize, force: Vec3, duration: f64) -> Result<ForceEvent> {
        self.submit_force(voxel, force, duration)?
            .blocking_recv()
            .map_err(|_| Error::InvalidArgument("simulation has stopped".into()))?
    }

    /// Stop the simulation thread and wait for it.
    pub fn stop(&self) {
        let _ = self.commands.send(Command::Stop);
        let handle = self.handle.lock().unwrap_or_else(PoisonError::into_inner).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }

    /// Block until the thread exits on its own (e.g. `max_frames`).
    pub fn join(&self) {
        let handle = self.handle.lock().unwrap_or_else(PoisonError::into_inner).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

impl Drop for LiveSession {
    fn drop(&mut self) {
        self.stop();
    }
}

struct Worker {
    session: InteractiveSession,
    commands: mpsc::Receiver<Command>,
    frames: watch::Sender<Option<Arc<Frame>>>,
    metrics: Arc<Mutex<MetricsState>>,
    recorder: Option<EventRecorder>,
    options: LiveOptions,
}

impl Worker {
    fn run(mut self) {
        let outcome = self.run_loop();
        let mut m = self.metrics.lock().unwrap_or_else(PoisonError::into_inner);
        m.running = false;
        if let Err(e) = outcome {
            log::error!("simulation stopped: {e}");
            m.last_error = Some(e.to_string());
        }
    }

    fn run_loop(&mut self) -> Result<()> {
        let mut replay = std::mem::take(&mut self.options.replay);
        replay.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut next_replay = 0;
        let dt = self.session.config().dt;
        let clock = Instant::now();
        loop {
            if self.options.max_frames.is_some_and(|max| self.session.steps() >= max) {
                return Ok(());
            }
            loop {
                match self.commands.try_recv() {
                    Ok(cmd) => {
                        if !self.handle(cmd)? {
                            return Ok(());
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => return Ok(()),
                }
            }
            let now = self.session.time();
            while next_replay < replay.len() && replay[next_replay].start <= now {
                let event = replay[next_replay];
                next_replay += 1;
                self.session.push_event(event)?;
                self.applied(event)?;
            }

            let frame = Arc::new(self.session.step()?);
            {
                let mut m = self.metrics.lock().unwrap_or_else(PoisonError::into_inner);
                m.frames = self.session.steps();
                m.sim_time = frame.time;
                if m.window.len() == METRICS_WINDOW {
                    m.window.pop_front();
                }
                m.window.push_back(frame.timings);
            }
            self.frames.send_replace(Some(frame));

            if self.options.realtime {
                let deadline = Duration::from_secs_f64(self.session.time());
                let elapsed = clock.elapsed();
                if elapsed > deadline + Duration::from_secs_f64(dt) {
                    self.metrics.lock().unwrap_or_else(PoisonError::into_inner).late_frames += 1;
                }
                // Wait out the rest of the step while staying responsive.
                loop {
                    let elapsed = clock.elapsed();
                    if elapsed >= deadline {
                        break;
                    }
                    match self.commands.recv_timeout(deadline - elapsed) {
                        Ok(cmd) => {
                            if !self.handle(cmd)? {
                                return Ok(());
                            }
                        }
                        Err(RecvTimeoutError::Timeout) => break,
                        Err(RecvTimeoutError::Disconnected) => return Ok(()),
                    }
                }
            }
        }
    }

    /// Returns false on stop.
    fn handle(&mut self, cmd: Command) -> Result<bool> {
        match cmd {
            Command::Stop => Ok(false),
            Command::Force {
                voxel,
                force,
                duration,
                reply,
            } => {
                let result = self.session.apply_force(voxel, force, duration);
                if let Ok(event) = result {
                    self.applied(event)?;
                }
                let _ = reply.send(result);
                Ok(true)
            }
        }
    }

    fn applied(&mut self, event: ForceEvent) -> Result<()> {
        if let Some(rec) = &mut self.recorder {
            rec.record(event)?;
        }
        self.metrics.lock().unwrap_or_else(PoisonError::into_inner).events_applied += 1;
        Ok(())
    }
}
