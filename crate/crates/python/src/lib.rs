//! Python bindings: meshes, motion, voxel grids, spectra, splats and the
//! interactive session.
//!
//! Positions and displacements cross the boundary as lists of `(x, y, z)`
//! tuples. Bad input raises `ValueError`, file problems raise `OSError`, and
//! simulation failures raise `RuntimeError`.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use spectree_core::engine::PayloadKind;
use spectree_core::spectrum::{fft_compress, hf_energy_ratio, lss_metric, read_svsp, reconstruct_motion, write_svsp};
use spectree_core::splat::{export_splats, SplatPose};
use spectree_core::synth::{curate, synthesize, SynthParams};
use spectree_core::{
    load_mesh, save_mesh, Error, GaussianCloud, InteractiveSession, Integrator, MotionSequence, SessionConfig,
    SparseVoxelGrid, SparseVoxelSpectrum, TriMesh, Vec3,
};

type Point = (f64, f64, f64);

fn err(e: Error) -> PyErr {
    match e {
        Error::File { .. } | Error::Io(_) => PyOSError::new_err(e.to_string()),
        e if e.is_data_error() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(v: &Vec3) -> Point {
    (v.x, v.y, v.z)
}

fn points(vs: &[Vec3]) -> Vec<Point> {
    vs.iter().map(point).collect()
}

fn vec3s(ps: Vec<Point>) -> Vec<Vec3> {
    ps.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect()
}

/// Triangle mesh.
#[pyclass(name = "Mesh", module = "spectree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<TriMesh>,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<Point>, faces: Vec<[u32; 3]>) -> PyResult<Self> {
        let inner = TriMesh::new(vec3s(vertices), faces).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    /// Load an OBJ or PLY file; degenerate faces are dropped.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let loaded = load_mesh(path).map_err(err)?;
        Ok(Self {
            inner: Arc::new(loaded.mesh),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_mesh(&self.inner, path).map_err(err)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn face_count(&self) -> usize {
        self.inner.face_count()
    }

    #[getter]
    fn vertices(&self) -> Vec<Point> {
        points(self.inner.vertices())
    }

    #[getter]
    fn faces(&self) -> Vec<[u32; 3]> {
        self.inner.faces().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(vertices={}, faces={})", self.inner.vertex_count(), self.inner.face_count())
    }
}

/// Per-vertex displacement sequence, frame-major.
#[pyclass(name = "Motion", module = "spectree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMotion {
    inner: MotionSequence,
}

#[pymethods]
impl PyMotion {
    /// `displacements` holds `frames × vertex_count` points, frame-major.
    #[new]
    fn new(frames: usize, vertex_count: usize, fps: f64, displacements: Vec<Point>) -> PyResult<Self> {
        let inner = MotionSequence::new(frames, vertex_count, fps, vec3s(displacements)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zeros(frames: usize, vertex_count: usize, fps: f64) -> PyResult<Self> {
        Ok(Self {
            inner: MotionSequence::zeros(frames, vertex_count, fps).map_err(err)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: spectree_core::spectrum::read_motion(path).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        spectree_core::spectrum::write_motion(&self.inner, path).map_err(err)
    }

    #[getter]
    fn frames(&self) -> usize {
        self.inner.frames()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn fps(&self) -> f64 {
        self.inner.fps()
    }

    fn frame(&self, t: usize) -> PyResult<Vec<Point>> {
        if t >= self.inner.frames() {
            return Err(PyValueError::new_err(format!("frame {t} of {}", self.inner.frames())));
        }
        Ok(points(self.inner.frame(t)))
    }

    fn rms(&self) -> f64 {
        self.inner.rms()
    }

    fn relative_l2_error(&self, reference: &PyMotion) -> PyResult<f64> {
        self.inner.relative_l2_error(&reference.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Motion(frames={}, vertices={}, fps={})",
            self.inner.frames(),
            self.inner.vertex_count(),
            self.inner.fps()
        )
    }
}

/// Occupied cells of a cubic grid over a mesh, with the vertex→voxel map.
#[pyclass(name = "VoxelGrid", module = "spectree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVoxelGrid {
    inner: Arc<SparseVoxelGrid>,
}

#[pymethods]
impl PyVoxelGrid {
    #[new]
    fn new(mesh: &PyMesh, resolution: u32) -> PyResult<Self> {
        let inner = SparseVoxelGrid::build(&mesh.inner, resolution).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn resolution(&self) -> u32 {
        self.inner.resolution()
    }

    #[getter]
    fn voxel_count(&self) -> usize {
        self.inner.voxel_count()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn voxel_size(&self) -> f64 {
        self.inner.voxel_size()
    }

    #[getter]
    fn origin(&self) -> Point {
        point(&self.inner.origin())
    }

    #[getter]
    fn vertex_to_voxel(&self) -> Vec<u32> {
        self.inner.vertex_to_voxel().to_vec()
    }

    fn voxel_centers(&self) -> Vec<Point> {
        points(&self.inner.voxel_centers())
    }

    /// Average per voxel, then copy back to the member vertices.
    fn voxel_shared(&self, motion: &PyMotion) -> PyResult<PyMotion> {
        let voxels = self.inner.voxelize_motion(&motion.inner).map_err(err)?;
        Ok(PyMotion {
            inner: self.inner.devoxelize_motion(&voxels).map_err(err)?,
        })
    }

    /// Share of the voxelized motion's energy at or above bin `cutoff`.
    fn hf_energy_ratio(&self, motion: &PyMotion, cutoff: usize) -> PyResult<f64> {
        let voxels = self.inner.voxelize_motion(&motion.inner).map_err(err)?;
        hf_energy_ratio(&voxels, cutoff).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("VoxelGrid(resolution={}, voxels={})", self.inner.resolution(), self.inner.voxel_count())
    }
}

/// The lowest `bins` DFT coefficients of every voxel's motion.
#[pyclass(name = "Spectrum", module = "spectree", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpectrum {
    inner: SparseVoxelSpectrum,
}

#[pymethods]
impl PySpectrum {
    /// Read an `.svsp` file and attach it to the mesh it was built on.
    #[staticmethod]
    fn load(path: PathBuf, mesh: &PyMesh) -> PyResult<Self> {
        let file = read_svsp(path).map_err(err)?;
        Ok(Self {
            inner: file.into_spectrum(&mesh.inner).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_svsp(&self.inner, path).map_err(err)
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    #[getter]
    fn frames(&self) -> usize {
        self.inner.frames()
    }

    #[getter]
    fn fps(&self) -> f64 {
        self.inner.fps()
    }

    #[getter]
    fn voxel_count(&self) -> usize {
        self.inner.voxel_count()
    }

    #[getter]
    fn grid(&self) -> PyVoxelGrid {
        PyVoxelGrid {
            inner: self.inner.grid().clone(),
        }
    }

    fn bin_frequency_hz(&self, bin: usize) -> f64 {
        self.inner.bin_frequency_hz(bin)
    }

    /// Coefficients of one voxel and bin, per axis.
    fn coefficient(&self, voxel: usize, bin: usize) -> PyResult<[(f64, f64); 3]> {
        if voxel >= self.inner.voxel_count() || bin >= self.inner.bins() {
            return Err(PyValueError::new_err(format!("no coefficient at voxel {voxel}, bin {bin}")));
        }
        Ok(self.inner.coefficient(voxel, bin).map(|c| (c.re, c.im)))
    }

    /// Per-vertex motion rebuilt from the kept bins.
    fn reconstruct(&self, py: Python<'_>) -> PyResult<PyMotion> {
        let inner = py.detach(|| reconstruct_motion(&self.inner, self.inner.grid())).map_err(err)?;
        Ok(PyMotion { inner })
    }

    /// Local spectral smoothness over voxel centres, with default settings.
    fn lss(&self, py: Python<'_>) -> PyResult<f64> {
        let cfg = SessionConfig::default().lss;
        py.detach(|| lss_metric(&self.inner, &self.inner.grid().voxel_centers(), &cfg))
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Spectrum(voxels={}, bins={}, frames={}, fps={})",
            self.inner.voxel_count(),
            self.inner.bins(),
            self.inner.frames(),
            self.inner.fps()
        )
    }
}

/// Per-frame attributes of every splat.
#[pyclass(name = "SplatPose", module = "spectree", frozen)]
struct PySplatPose {
    inner: SplatPose,
}

#[pymethods]
impl PySplatPose {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn means(&self) -> Vec<Point> {
        points(&self.inner.means)
    }

    #[getter]
    fn scales(&self) -> Vec<Point> {
        points(&self.inner.scales)
    }

    /// Unit quaternions `(w, x, y, z)` with `w ≥ 0`.
    #[getter]
    fn quaternions(&self) -> Vec<[f64; 4]> {
        (0..self.inner.len()).map(|i| self.inner.quaternion(i)).collect()
    }

    #[getter]
    fn frozen(&self) -> Vec<bool> {
        self.inner.frozen.clone()
    }
}

/// Gaussians bound to mesh faces.
#[pyclass(name = "GaussianCloud", module = "spectree", frozen)]
struct PyGaussianCloud {
    inner: GaussianCloud,
}

#[pymethods]
impl PyGaussianCloud {
    #[new]
    fn new(mesh: &PyMesh, per_face: usize) -> PyResult<Self> {
        Ok(Self {
            inner: GaussianCloud::bind(&mesh.inner, per_face).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn rest_pose(&self) -> PySplatPose {
        PySplatPose {
            inner: self.inner.rest_pose().clone(),
        }
    }

    /// Pose on deformed copies of the binding mesh's vertices.
    fn pose(&self, vertices: Vec<Point>) -> PyResult<PySplatPose> {
        Ok(PySplatPose {
            inner: self.inner.pose(&vec3s(vertices)).map_err(err)?,
        })
    }

    /// Write a pose as a 3D Gaussian splatting PLY.
    fn export(&self, pose: &PySplatPose, path: PathBuf) -> PyResult<()> {
        export_splats(&self.inner, &pose.inner, path).map_err(err)
    }
}

fn kind_name(kind: PayloadKind) -> &'static str {
    match kind {
        PayloadKind::Vertices => "vertices",
        PayloadKind::Splats => "splats",
    }
}

/// One simulated step.
#[pyclass(name = "Frame", module = "spectree", frozen, get_all)]
struct PyFrame {
    index: u32,
    time: f64,
    /// `"vertices"` or `"splats"`.
    kind: String,
    /// `3` floats per vertex or `10` per splat.
    payload: Vec<f32>,
}

/// Modal bank driven by user forces, stepped on demand.
#[pyclass(name = "Session", module = "spectree")]
struct PySession {
    inner: InteractiveSession,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (mesh, spectrum, *, dt=None, xi=None, force_scale=None, integrator=None, per_face=None, payload=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mesh: &PyMesh,
        spectrum: &PySpectrum,
        dt: Option<f64>,
        xi: Option<f64>,
        force_scale: Option<f64>,
        integrator: Option<&str>,
        per_face: Option<usize>,
        payload: Option<&str>,
    ) -> PyResult<Self> {
        let spec = &spectrum.inner;
        let mut config = SessionConfig {
            resolution: spec.grid().resolution(),
            bins: spec.bins(),
            fps: spec.fps(),
            ..SessionConfig::default()
        };
        if let Some(v) = dt {
            config.dt = v;
        }
        if let Some(v) = xi {
            config.xi = v;
        }
        if let Some(v) = force_scale {
            config.force_scale = v;
        }
        if let Some(v) = integrator {
            config.integrator = v.parse::<Integrator>().map_err(err)?;
        }
        if let Some(v) = per_face {
            config.per_face = v;
        }
        if let Some(v) = payload {
            config.payload = v.parse::<PayloadKind>().map_err(err)?;
        }
        let inner = InteractiveSession::new(mesh.inner.clone(), spec, config).map_err(err)?;
        Ok(Self { inner })
    }

    /// Push voxel `voxel` with `force` for `duration` seconds from now.
    /// Returns `(start, scaled force)`.
    fn apply_force(&mut self, voxel: usize, force: Point, duration: f64) -> PyResult<(f64, [f64; 3])> {
        let event = self
            .inner
            .apply_force(voxel, Vec3::new(force.0, force.1, force.2), duration)
            .map_err(err)?;
        Ok((event.start, event.force))
    }

    fn step(&mut self, py: Python<'_>) -> PyResult<PyFrame> {
        let frame = py.detach(|| self.inner.step()).map_err(err)?;
        Ok(PyFrame {
            index: frame.index,
            time: frame.time,
            kind: kind_name(frame.kind).to_owned(),
            payload: frame.payload,
        })
    }

    /// Step `n` times and return the last frame.
    fn run(&mut self, py: Python<'_>, n: usize) -> PyResult<PyFrame> {
        if n == 0 {
            return Err(PyValueError::new_err("run needs at least one step"));
        }
        let frame = py
            .detach(|| {
                let mut last = self.inner.step()?;
                for _ in 1..n {
                    last = self.inner.step()?;
                }
                Ok(last)
            })
            .map_err(err)?;
        Ok(PyFrame {
            index: frame.index,
            time: frame.time,
            kind: kind_name(frame.kind).to_owned(),
            payload: frame.payload,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps()
    }

    fn positions(&self) -> Vec<Point> {
        points(self.inner.positions())
    }

    fn modal_energy(&self) -> f64 {
        self.inner.modal_energy()
    }

    /// The static scene description served to viewers, as JSON.
    fn snapshot_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.snapshot()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Example procedural parameters as JSON.
#[pyfunction]
fn example_params(seed: u64) -> PyResult<String> {
    serde_json::to_string(&SynthParams::example(seed)).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Grow and animate one procedural tree from JSON parameters.
#[pyfunction]
fn synthesize_tree(py: Python<'_>, params: &str) -> PyResult<(PyMesh, PyMotion)> {
    let params = SynthParams::from_json(params).map_err(err)?;
    let sample = py.detach(|| synthesize(&params)).map_err(err)?;
    Ok((
        PyMesh {
            inner: Arc::new(sample.mesh),
        },
        PyMotion { inner: sample.motion },
    ))
}

/// `(hf_ratio, accepted)` for a synthesized motion.
#[pyfunction]
#[pyo3(signature = (motion, grid, cutoff=spectree_core::synth::DEFAULT_HF_CUTOFF, threshold=spectree_core::synth::DEFAULT_HF_THRESHOLD))]
fn curate_motion(motion: &PyMotion, grid: &PyVoxelGrid, cutoff: usize, threshold: f64) -> PyResult<(f64, bool)> {
    let report = curate(&motion.inner, &grid.inner, cutoff, threshold).map_err(err)?;
    Ok((report.hf_ratio, report.accepted))
}

/// Voxelize per-vertex motion on `grid` and keep the lowest `bins` bins.
#[pyfunction]
#[pyo3(signature = (motion, grid, bins, fps=None))]
fn compress(py: Python<'_>, motion: &PyMotion, grid: &PyVoxelGrid, bins: usize, fps: Option<f64>) -> PyResult<PySpectrum> {
    let fps = fps.unwrap_or(motion.inner.fps());
    let inner = py
        .detach(|| {
            let voxels = grid.inner.voxelize_motion(&motion.inner)?;
            fft_compress(&voxels, grid.inner.clone(), bins, fps)
        })
        .map_err(err)?;
    Ok(PySpectrum { inner })
}

#[pymodule]
fn spectree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyMotion>()?;
    m.add_class::<PyVoxelGrid>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyGaussianCloud>()?;
    m.add_class::<PySplatPose>()?;
    m.add_class::<PySession>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(example_params, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_tree, m)?)?;
    m.add_function(wrap_pyfunction!(curate_motion, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
