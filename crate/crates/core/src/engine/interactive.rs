use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{elapsed_ms, FrameTimings, SessionConfig};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::modal::{ForceEvent, ModalBank, ModalParams, ModalState, DEFAULT_MODAL_MASS};
use crate::spectrum::SparseVoxelSpectrum;
use crate::splat::{quaternion_wxyz, GaussianCloud, SplatPose};
use crate::voxel::SparseVoxelGrid;

/// What each interactive frame carries besides its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    /// Deformed vertex positions, `3N` floats.
    #[default]
    Vertices,
    /// Per primitive: mean (3), rotation quaternion `wxyz` (4), scale (3).
    Splats,
}

impl std::str::FromStr for PayloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertices" => Ok(Self::Vertices),
            "splats" => Ok(Self::Splats),
            other => Err(Error::InvalidArgument(format!(
                "unknown payload `{other}` (expected vertices or splats)"
            ))),
        }
    }
}

/// One simulated step, ready to ship.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Steps taken so far (the first frame is 1).
    pub index: u32,
    /// Simulation time after the step (s).
    pub time: f64,
    pub kind: PayloadKind,
    /// `3N` deformed vertex positions for [`PayloadKind::Vertices`], or
    /// `10` floats per primitive for [`PayloadKind::Splats`].
    pub payload: Vec<f32>,
    pub timings: FrameTimings,
}

impl Frame {
    /// Equality ignoring wall-clock timings.
    pub fn same_content(&self, other: &Frame) -> bool {
        self.index == other.index
            && self.time.to_bits() == other.time.to_bits()
            && self.kind == other.kind
            && self.payload.len() == other.payload.len()
            && self.payload.iter().zip(&other.payload).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Static scene description sent once to each viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub vertices: Vec<[f32; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub resolution: u32,
    pub voxel_count: usize,
    pub voxel_size: f64,
    pub origin: [f64; 3],
    pub bins: usize,
    pub omega_max: f64,
    pub splat_count: usize,
    pub config: SessionConfig,
}

/// A modal bank advanced in fixed steps under user forces.
///
/// Each step projects the active forces onto the modes, integrates, then
/// superposes, devoxelizes and (when bound) poses the splats. Given the same
/// spectrum, configuration and force events, the frame contents are
/// bit-identical across runs.
pub struct InteractiveSession {
    config: SessionConfig,
    mesh: Arc<TriMesh>,
    grid: Arc<SparseVoxelGrid>,
    bank: ModalBank,
    cloud: Option<GaussianCloud>,
    state: ModalState,
    steps: u64,
    active: Vec<ForceEvent>,
    forces: Vec<Complex64>,
    voxel_disp: Vec<Vec3>,
    vertex_disp: Vec<Vec3>,
    deformed: Vec<Vec3>,
    pose: Option<SplatPose>,
}

impl InteractiveSession {
    pub fn new(mesh: Arc<TriMesh>, spectrum: &SparseVoxelSpectrum, config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let grid = spectrum.grid().clone();
        if grid.vertex_count() != mesh.vertex_count() {
            return Err(Error::Mismatch(format!(
                "spectrum grid covers {} vertices, mesh has {}",
                grid.vertex_count(),
                mesh.vertex_count()
            )));
        }
        let bank = ModalBank::with_params(
            spectrum,
            ModalParams {
                xi: config.xi,
                mass: DEFAULT_MODAL_MASS,
            },
        )?;
        bank.check_dt(config.dt)?;
        let cloud = if config.per_face > 0 {
            Some(GaussianCloud::bind(&mesh, config.per_face)?)
        } else {
            None
        };
        let pose = cloud.as_ref().map(|c| c.rest_pose().clone());
        Ok(Self {
            state: bank.zero_state(),
            forces: vec![Complex64::default(); bank.mode_count()],
            voxel_disp: vec![Vec3::zeros(); grid.voxel_count()],
            vertex_disp: vec![Vec3::zeros(); mesh.vertex_count()],
            deformed: mesh.vertices().to_vec(),
            config,
            mesh,
            grid,
            bank,
            cloud,
            steps: 0,
            active: Vec::new(),
            pose,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn grid(&self) -> &Arc<SparseVoxelGrid> {
        &self.grid
    }

    pub fn bank(&self) -> &ModalBank {
        &self.bank
    }

    pub fn cloud(&self) -> Option<&GaussianCloud> {
        self.cloud.as_ref()
    }

    pub fn state(&self) -> &ModalState {
        &self.state
    }

    /// Current deformed vertex positions.
    pub fn positions(&self) -> &[Vec3] {
        &self.deformed
    }

    /// Current splat pose, when splats are bound.
    pub fn pose(&self) -> Option<&SplatPose> {
        self.pose.as_ref()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Simulation time, `steps · dt`.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    pub fn active_events(&self) -> &[ForceEvent] {
        &self.active
    }

    pub fn modal_energy(&self) -> f64 {
        self.bank.modal_energy(&self.state)
    }

    /// Start a force now. The force is multiplied by the configured scale and
    /// stamped with the current simulation time; the returned event affects
    /// every frame after that time.
    pub fn apply_force(&mut self, voxel: usize, force: Vec3, duration: f64) -> Result<ForceEvent> {
        let event = ForceEvent::new(voxel, force * self.config.force_scale, self.time(), duration)?;
        self.push_event(event)?;
        Ok(event)
    }

    /// Insert an already-stamped event (e.g. from a recorded log) unchanged.
    pub fn push_event(&mut self, event: ForceEvent) -> Result<()> {
        event.validate()?;
        if event.voxel >= self.grid.voxel_count() {
            return Err(Error::InvalidArgument(format!(
                "force targets voxel {} of {}",
                event.voxel,
                self.grid.voxel_count()
            )));
        }
        self.active.push(event);
        Ok(())
    }

    /// Advance one step and produce the resulting frame.
    pub fn step(&mut self) -> Result<Frame> {
        let started = Instant::now();
        let t = self.time();
        self.active.retain(|e| !e.has_expired(t));

        let stage = Instant::now();
        self.bank.project_force_into(&self.active, t, &mut self.forces)?;
        self.bank
            .step_in_place(&mut self.state, &self.forces, self.config.dt, self.config.integrator)?;
        self.bank.superpose_into(&self.state, &mut self.voxel_disp)?;
        let modal_ms = elapsed_ms(stage);

        let stage = Instant::now();
        self.grid.devoxelize_into(&self.voxel_disp, &mut self.vertex_disp)?;
        self.deformed
            .par_iter_mut()
            .with_min_len(8192)
            .zip(self.mesh.vertices().par_iter().with_min_len(8192))
            .zip(self.vertex_disp.par_iter().with_min_len(8192))
            .for_each(|((out, rest), d)| *out = rest + d);
        let devoxelize_ms = elapsed_ms(stage);

        let stage = Instant::now();
        if let (Some(cloud), Some(pose)) = (&self.cloud, &mut self.pose) {
            cloud.pose_into(&self.deformed, pose)?;
        }
        let pose_ms = elapsed_ms(stage);

        self.steps += 1;
        if self.state.q.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
            return Err(Error::NonFinite(format!("modal state at step {}", self.steps)));
        }
        let payload = self.pack_payload();
        let index = u32::try_from(self.steps).map_err(|_| Error::InvalidArgument("frame counter overflow".into()))?;
        Ok(Frame {
            index,
            time: self.time(),
            kind: self.config.payload,
            payload,
            timings: FrameTimings {
                modal_ms,
                devoxelize_ms,
                pose_ms,
                total_ms: elapsed_ms(started),
            },
        })
    }

    fn pack_payload(&self) -> Vec<f32> {
        match (self.config.payload, &self.pose) {
            (PayloadKind::Splats, Some(pose)) => {
                let mut out = vec![0f32; pose.len() * 10];
                out.par_chunks_exact_mut(10)
                    .with_min_len(4096)
                    .enumerate()
                    .for_each(|(i, slot)| {
                        let (m, s) = (pose.means[i], pose.scales[i]);
                        let q = quaternion_wxyz(&pose.rotations[i]);
                        slot[0..3].copy_from_slice(&[m.x as f32, m.y as f32, m.z as f32]);
                        slot[3..7].copy_from_slice(&q.map(|c| c as f32));
                        slot[7..10].copy_from_slice(&[s.x as f32, s.y as f32, s.z as f32]);
                    });
                out
            }
            _ => self.deformed.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
        }
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot {
            vertices: self
                .mesh
                .vertices()
                .iter()
                .map(|p| [p.x as f32, p.y as f32, p.z as f32])
                .collect(),
            faces: self.mesh.faces().to_vec(),
            resolution: self.grid.resolution(),
            voxel_count: self.grid.voxel_count(),
            voxel_size: self.grid.voxel_size(),
            origin: self.grid.origin().into(),
            bins: self.bank.bins(),
            omega_max: self.bank.omega_max(),
            splat_count: self.cloud.as_ref().map_or(0, GaussianCloud::len),
            config: self.config,
        }
    }
}

/// Run `frames` steps, injecting each event once the simulation clock reaches
/// its start time. Events are used as given (no force scaling), so a recorded
/// log replays exactly.
pub fn run_interactive(
    mesh: Arc<TriMesh>,
    spectrum: &SparseVoxelSpectrum,
    config: SessionConfig,
    events: &[ForceEvent],
    frames: usize,
) -> Result<Vec<Frame>> {
    let mut session = InteractiveSession::new(mesh, spectrum, config)?;
    let mut pending: Vec<ForceEvent> = events.to_vec();
    pending.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut next = 0;
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let now = session.time();
        while next < pending.len() && pending[next].start <= now {
            session.push_event(pending[next])?;
            next += 1;
        }
        out.push(session.step()?);
    }
    Ok(out)
}
