//! Modal dynamics on a sparse voxel spectrum.
//!
//! Bin `k ≥ 1` of the spectrum is read as a complex mode shape `φ_k` with
//! natural frequency `ω_k = 2π·k·fps/T`. Each mode is an independent damped
//! oscillator `m q̈ + c q̇ + k q = f` driven by point loads projected onto the
//! conjugated shape, and the voxel response is `Re Σ_k φ_k q_k`. The DC bin
//! is excluded: a zero-frequency mode would let a rooted tree drift.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::spectrum::{Coeff3, SparseVoxelSpectrum};

pub const DEFAULT_DAMPING_RATIO: f64 = 0.05;
pub const DEFAULT_MODAL_MASS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Velocity first, then position from the new velocity.
    #[default]
    SemiImplicit,
    /// Position and velocity both from the old state.
    Explicit,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi-implicit" | "semi_implicit" => Ok(Integrator::SemiImplicit),
            "explicit" => Ok(Integrator::Explicit),
            other => Err(Error::InvalidArgument(format!(
                "unknown integrator `{other}` (expected semi-implicit or explicit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalParams {
    /// Damping ratio ξ shared by every mode.
    pub xi: f64,
    /// Mass shared by every mode.
    pub mass: f64,
}

impl Default for ModalParams {
    fn default() -> Self {
        Self {
            xi: DEFAULT_DAMPING_RATIO,
            mass: DEFAULT_MODAL_MASS,
        }
    }
}

/// A point load on one voxel, active on `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEvent {
    pub voxel: usize,
    pub force: [f64; 3],
    pub start: f64,
    pub duration: f64,
}

impl ForceEvent {
    pub fn new(voxel: usize, force: Vec3, start: f64, duration: f64) -> Result<Self> {
        let ev = Self {
            voxel,
            force: force.into(),
            start,
            duration,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "force duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.start.is_finite() || self.force.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite("force event".into()));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.start + self.duration
    }

    pub fn has_expired(&self, t: f64) -> bool {
        t >= self.start + self.duration
    }
}

/// Modal coordinates `q_k`, velocities `q̇_k` for bins `1..K`, and time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub q: Vec<Complex64>,
    pub q_dot: Vec<Complex64>,
    pub time: f64,
}

impl ModalState {
    pub fn zeros(modes: usize) -> Self {
        Self {
            q: vec![Complex64::default(); modes],
            q_dot: vec![Complex64::default(); modes],
            time: 0.0,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.q.len()
    }

    /// Coordinate of bin `k` (`k ≥ 1`).
    pub fn coordinate(&self, bin: usize) -> Complex64 {
        self.q[bin - 1]
    }
}

#[derive(Debug, Clone)]
pub struct ModalBank {
    bins: usize,
    frames: usize,
    fps: f64,
    voxels: usize,
    params: ModalParams,
    /// `omega[m]` is the natural frequency of bin `m + 1`.
    omega: Vec<f64>,
    /// Voxel-major shapes: `shapes[v * M + m]` is `φ_{m+1}[v]`.
    shapes: Vec<Coeff3>,
}

impl ModalBank {
    pub fn build(spectrum: &SparseVoxelSpectrum, xi: f64) -> Result<Self> {
        Self::with_params(
            spectrum,
            ModalParams {
                xi,
                ..Default::default()
            },
        )
    }

    pub fn with_params(spectrum: &SparseVoxelSpectrum, params: ModalParams) -> Result<Self> {
        if !(params.xi > 0.0 && params.xi < 1.0) {
            return Err(Error::InvalidArgument(format!("damping ratio ξ must lie in (0, 1), got {}", params.xi)));
        }
        if !(params.mass > 0.0 && params.mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("modal mass must be positive, got {}", params.mass)));
        }
        let k_len = spectrum.bins();
        if k_len < 2 {
            return Err(Error::InvalidArgument(format!(
                "a modal bank needs K ≥ 2 (one dynamic mode), got K = {k_len}"
            )));
        }
        let m_len = k_len - 1;
        let n = spectrum.voxel_count();
        let mut shapes = Vec::with_capacity(n * m_len);
        for v in 0..n {
            shapes.extend_from_slice(&spectrum.voxel_bins(v)[1..]);
        }
        let omega = (1..k_len)
            .map(|k| TAU * k as f64 * spectrum.fps() / spectrum.frames() as f64)
            .collect();
        Ok(Self {
            bins: k_len,
            frames: spectrum.frames(),
            fps: spectrum.fps(),
            voxels: n,
            params,
            omega,
            shapes,
        })
    }

    /// Number of dynamic modes, `K − 1`.
    pub fn mode_count(&self) -> usize {
        self.bins - 1
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels
    }

    pub fn params(&self) -> ModalParams {
        self.params
    }

    /// `ω_k` in rad/s; zero for the excluded DC bin.
    pub fn omega(&self, bin: usize) -> f64 {
        if bin == 0 {
            0.0
        } else {
            self.omega[bin - 1]
        }
    }

    pub fn omega_max(&self) -> f64 {
        *self.omega.last().unwrap()
    }

    pub fn mass(&self, _bin: usize) -> f64 {
        self.params.mass
    }

    pub fn stiffness(&self, bin: usize) -> f64 {
        self.params.mass * self.omega(bin).powi(2)
    }

    pub fn damping(&self, bin: usize) -> f64 {
        2.0 * self.params.xi * self.params.mass * self.omega(bin)
    }

    /// `φ_k[voxel]` for `k ≥ 1`.
    pub fn shape(&self, bin: usize, voxel: usize) -> Coeff3 {
        self.shapes[voxel * self.mode_count() + bin - 1]
    }

    pub fn zero_state(&self) -> ModalState {
        ModalState::zeros(self.mode_count())
    }

    /// Stability guard for the explicit-in-stiffness update: `dt·ω_max < 2`.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let product = dt * self.omega_max();
        if product >= 2.0 {
            return Err(Error::StabilityGuard(format!(
                "dt·ω_max = {dt}·{:.4} = {product:.4} ≥ 2; use dt < {:.6}",
                self.omega_max(),
                2.0 / self.omega_max()
            )));
        }
        Ok(())
    }

    fn check_state(&self, state: &ModalState) -> Result<()> {
        if state.q.len() != self.mode_count() || state.q_dot.len() != self.mode_count() {
            return Err(Error::Mismatch(format!(
                "state has {} modes, bank has {}",
                state.q.len(),
                self.mode_count()
            )));
        }
        Ok(())
    }

    /// `f_k(t) = Σ conj(φ_k[target])·force` over events active at `t`.
    pub fn project_force(&self, events: &[ForceEvent], t: f64) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.mode_count()];
        self.project_force_into(events, t, &mut out)?;
        Ok(out)
    }

    pub fn project_force_into(&self, events: &[ForceEvent], t: f64, out: &mut [Complex64]) -> Result<()> {
        if out.len() != self.mode_count() {
            return Err(Error::Mismatch(format!("{} force slots for {} modes", out.len(), self.mode_count())));
        }
        out.fill(Complex64::default());
        let m_len = self.mode_count();
        for ev in events {
            if ev.voxel >= self.voxels {
                return Err(Error::InvalidArgument(format!(
                    "force targets voxel {} of {}",
                    ev.voxel, self.voxels
                )));
            }
            if !ev.is_active(t) {
                continue;
            }
            let shapes = &self.shapes[ev.voxel * m_len..(ev.voxel + 1) * m_len];
            for (slot, phi) in out.iter_mut().zip(shapes) {
                for (c, f) in phi.iter().zip(ev.force) {
                    *slot += c.conj() * f;
                }
            }
        }
        Ok(())
    }

    /// Advance every mode by `dt` under constant modal forces.
    pub fn step(&self, state: &ModalState, forces: &[Complex64], dt: f64, integrator: Integrator) -> Result<ModalState> {
        let mut next = state.clone();
        self.step_in_place(&mut next, forces, dt, integrator)?;
        Ok(next)
    }

    pub fn step_in_place(
        &self,
        state: &mut ModalState,
        forces: &[Complex64],
        dt: f64,
        integrator: Integrator,
    ) -> Result<()> {
        self.check_dt(dt)?;
        self.check_state(state)?;
        if forces.len() != self.mode_count() {
            return Err(Error::Mismatch(format!(
                "{} modal forces for {} modes",
                forces.len(),
                self.mode_count()
            )));
        }
        let m = self.params.mass;
        for (i, &f) in forces.iter().enumerate() {
            let bin = i + 1;
            let (k, c) = (self.stiffness(bin), self.damping(bin));
            let (q, v) = (state.q[i], state.q_dot[i]);
            let accel = (f - v * c - q * k) / m;
            let v_next = v + accel * dt;
            state.q_dot[i] = v_next;
            state.q[i] = match integrator {
                Integrator::SemiImplicit => q + v_next * dt,
                Integrator::Explicit => q + v * dt,
            };
        }
        state.time += dt;
        Ok(())
    }

    /// `D = Re Σ_k φ_k q_k` per voxel.
    pub fn superpose(&self, state: &ModalState) -> Result<Vec<Vec3>> {
        let mut out = vec![Vec3::zeros(); self.voxels];
        self.superpose_into(state, &mut out)?;
        Ok(out)
    }

    pub fn superpose_into(&self, state: &ModalState, out: &mut [Vec3]) -> Result<()> {
        self.check_state(state)?;
        if out.len() != self.voxels {
            return Err(Error::Mismatch(format!("{} output slots for {} voxels", out.len(), self.voxels)));
        }
        let m_len = self.mode_count();
        let q = &state.q;
        out.par_iter_mut()
            .with_min_len(1024)
            .zip(self.shapes.par_chunks_exact(m_len).with_min_len(1024))
            .for_each(|(d, shapes)| {
                let mut acc = [0.0; 3];
                for (phi, qk) in shapes.iter().zip(q) {
                    for axis in 0..3 {
                        acc[axis] += phi[axis].re * qk.re - phi[axis].im * qk.im;
                    }
                }
                *d = Vec3::from(acc);
            });
        Ok(())
    }

    /// `Σ_k ½m|q̇_k|² + ½k_k|q_k|²`.
    pub fn modal_energy(&self, state: &ModalState) -> f64 {
        state
            .q
            .iter()
            .zip(&state.q_dot)
            .enumerate()
            .map(|(i, (q, v))| 0.5 * self.params.mass * v.norm_sqr() + 0.5 * self.stiffness(i + 1) * q.norm_sqr())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::SparseVoxelGrid;
    use std::sync::Arc;

    fn spectrum(n: usize, k: usize) -> SparseVoxelSpectrum {
        let pts: Vec<Vec3> = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let grid = Arc::new(SparseVoxelGrid::from_points(&pts, 64).unwrap());
        let coeffs = (0..n * k)
            .map(|i| {
                let bin = i % k;
                if bin == 3 {
                    [Complex64::default(); 3]
                } else {
                    [
                        Complex64::new(1.0 + i as f64, 0.5),
                        Complex64::new(-0.25, i as f64),
                        Complex64::new(0.0, 2.0),
                    ]
                }
            })
            .collect();
        SparseVoxelSpectrum::new(grid, k, 100, 24.0, coeffs).unwrap()
    }

    #[test]
    fn frequencies_and_coefficients() {
        let bank = ModalBank::build(&spectrum(3, 16), 0.05).unwrap();
        assert_eq!(bank.mode_count(), 15);
        assert!((bank.omega(1) - TAU * 0.24).abs() < 1e-12);
        assert_eq!(bank.omega(0), 0.0);
        assert!((bank.damping(2) - 2.0 * 0.05 * bank.omega(2)).abs() < 1e-15);
        assert!((bank.stiffness(2) - bank.omega(2).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(ModalBank::build(&spectrum(3, 1), 0.05).is_err());
        assert!(ModalBank::build(&spectrum(3, 4), 0.0).is_err());
        assert!(ModalBank::build(&spectrum(3, 4), 1.0).is_err());
    }

    #[test]
    fn zero_shape_mode_is_inert() {
        let bank = ModalBank::build(&spectrum(3, 8), 0.05).unwrap();
        let ev = ForceEvent::new(1, Vec3::new(1.0, 2.0, 3.0), 0.0, 1.0).unwrap();
        let f = bank.project_force(&[ev], 0.5).unwrap();
        assert_eq!(f[2], Complex64::default());
        let mut state = bank.zero_state();
        for _ in 0..50 {
            bank.step_in_place(&mut state, &f, 0.01, Integrator::SemiImplicit).unwrap();
        }
        assert_eq!(state.coordinate(3), Complex64::default());
    }

    #[test]
    fn projection_uses_conjugate_and_activity_window() {
        let bank = ModalBank::build(&spectrum(2, 4), 0.05).unwrap();
        let ev = ForceEvent::new(0, Vec3::new(2.0, 0.0, 0.0), 1.0, 0.5).unwrap();
        assert!(bank.project_force(&[ev], 0.99).unwrap().iter().all(|f| f.norm() == 0.0));
        assert!(bank.project_force(&[ev], 1.5).unwrap().iter().all(|f| f.norm() == 0.0));
        let f = bank.project_force(&[ev], 1.0).unwrap();
        let phi = bank.shape(1, 0)[0];
        assert_eq!(f[0], phi.conj() * 2.0);
        let bad = ForceEvent::new(5, Vec3::x(), 0.0, 1.0).unwrap();
        assert!(bank.project_force(&[bad], 0.0).is_err());
        assert!(ForceEvent::new(0, Vec3::x(), 0.0, 0.0).is_err());
    }

    #[test]
    fn guard_and_fixed_point() {
        let bank = ModalBank::build(&spectrum(2, 16), 0.05).unwrap();
        let limit = 2.0 / bank.omega_max();
        assert!(matches!(bank.check_dt(limit * 1.01), Err(Error::StabilityGuard(_))));
        assert!(bank.check_dt(limit * 0.99).is_ok());
        let zero = vec![Complex64::default(); bank.mode_count()];
        let s = bank.step(&bank.zero_state(), &zero, 0.01, Integrator::SemiImplicit).unwrap();
        assert!(s.q.iter().chain(&s.q_dot).all(|z| z.norm() == 0.0));
        assert!((s.time - 0.01).abs() < 1e-15);
    }

    #[test]
    fn one_hot_superposition() {
        let sp = spectrum(3, 6);
        let bank = ModalBank::build(&sp, 0.05).unwrap();
        let mut state = bank.zero_state();
        state.q[1] = Complex64::new(1.0, 0.0);
        let d = bank.superpose(&state).unwrap();
        for (v, dv) in d.iter().enumerate() {
            let phi = sp.coefficient(v, 2);
            assert_eq!(*dv, Vec3::new(phi[0].re, phi[1].re, phi[2].re));
        }
    }
}
