//! Sparse voxel spectrum: the first `K` temporal DFT bins of every voxel's
//! displacement.
//!
//! Convention: unnormalized forward transform
//! `X[k] = Σ_t x[t]·exp(−i2πkt/T)`, inverse scaled by `1/T`, and bins
//! `1..K` doubled on reconstruction to stand in for their discarded
//! conjugates. This is exact for signals supported on bins below `K`
//! because `K ≤ ⌊T/2⌋`.

mod io;
mod lss;

pub use io::{
    decode_motion, encode_motion, read_motion, read_svsp, write_motion, write_svsp, SvspFile, MOTN_MAGIC, SVSP_MAGIC,
    SVSP_VERSION,
};
pub use lss::{lss_metric, lss_per_bin, smooth_spectrum, LssConfig, NeighborGraph};

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::MotionSequence;
use crate::voxel::{SparseVoxelGrid, VoxelMotion};

pub const DEFAULT_BINS: usize = 16;
pub const DEFAULT_FRAMES: usize = 100;
pub const DEFAULT_FPS: f64 = 24.0;

/// One DFT coefficient per axis.
pub type Coeff3 = [Complex64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelSpectrum {
    bins: usize,
    frames: usize,
    fps: f64,
    grid: Arc<SparseVoxelGrid>,
    /// Voxel-major: `coefficients[v * K + k]`.
    coefficients: Vec<Coeff3>,
}

impl SparseVoxelSpectrum {
    pub fn new(
        grid: Arc<SparseVoxelGrid>,
        bins: usize,
        frames: usize,
        fps: f64,
        coefficients: Vec<Coeff3>,
    ) -> Result<Self> {
        check_bins(bins, frames)?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        let n = grid.voxel_count();
        if coefficients.len() != n * bins {
            return Err(Error::Mismatch(format!(
                "expected {n}×{bins} coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients
            .iter()
            .any(|c| c.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())))
        {
            return Err(Error::NonFinite("spectrum coefficients".into()));
        }
        Ok(Self {
            bins,
            frames,
            fps,
            grid,
            coefficients,
        })
    }

    pub fn zeros(grid: Arc<SparseVoxelGrid>, bins: usize, frames: usize, fps: f64) -> Result<Self> {
        let n = grid.voxel_count();
        Self::new(grid, bins, frames, fps, vec![[Complex64::default(); 3]; n * bins])
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

    pub fn grid(&self) -> &Arc<SparseVoxelGrid> {
        &self.grid
    }

    pub fn voxel_count(&self) -> usize {
        self.grid.voxel_count()
    }

    pub fn coefficients(&self) -> &[Coeff3] {
        &self.coefficients
    }

    pub fn coefficient(&self, voxel: usize, bin: usize) -> Coeff3 {
        self.coefficients[voxel * self.bins + bin]
    }

    pub fn set_coefficient(&mut self, voxel: usize, bin: usize, value: Coeff3) {
        self.coefficients[voxel * self.bins + bin] = value;
    }

    /// The `K` bins of one voxel.
    pub fn voxel_bins(&self, voxel: usize) -> &[Coeff3] {
        &self.coefficients[voxel * self.bins..(voxel + 1) * self.bins]
    }

    /// Frequency of bin `k` in Hz: `k·fps/T`.
    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.fps / self.frames as f64
    }

    /// Retained energy of one voxel/axis, `(1/T)(|X₀|² + 2Σ_{k≥1}|X_k|²)`.
    /// Bounded above by the time-domain energy `Σ_t x[t]²`.
    pub fn retained_energy(&self, voxel: usize, axis: usize) -> f64 {
        let bins = self.voxel_bins(voxel);
        let mut e = bins[0][axis].norm_sqr();
        for c in &bins[1..] {
            e += 2.0 * c[axis].norm_sqr();
        }
        e / self.frames as f64
    }

    /// Per-voxel time-domain motion `x̂[t]`, re-zeroed at frame 0.
    pub fn reconstruct_voxels(&self) -> VoxelMotion {
        let t_len = self.frames;
        let k_len = self.bins;
        // twiddle[t][k] = exp(+i2πkt/T), angle reduced mod T for accuracy.
        let twiddle: Vec<Complex64> = (0..t_len)
            .flat_map(|t| {
                (0..k_len).map(move |k| {
                    let phase = TAU * ((k * t) % t_len) as f64 / t_len as f64;
                    Complex64::new(phase.cos(), phase.sin())
                })
            })
            .collect();
        let n = self.voxel_count();
        let inv_t = 1.0 / t_len as f64;
        // Voxel-major scratch, transposed to frame-major at the end.
        let per_voxel: Vec<Vec<Vec3>> = (0..n)
            .into_par_iter()
            .map(|v| {
                let bins = self.voxel_bins(v);
                let mut series = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let tw = &twiddle[t * k_len..(t + 1) * k_len];
                    let mut acc = [bins[0][0].re, bins[0][1].re, bins[0][2].re];
                    for k in 1..k_len {
                        let (c, s) = (tw[k].re, tw[k].im);
                        for (a, slot) in acc.iter_mut().enumerate() {
                            let z = bins[k][a];
                            *slot += 2.0 * (z.re * c - z.im * s);
                        }
                    }
                    series.push(Vec3::from(acc) * inv_t);
                }
                let rest = series[0];
                for x in &mut series {
                    *x -= rest;
                }
                series[0] = Vec3::zeros();
                series
            })
            .collect();
        let mut out = vec![Vec3::zeros(); t_len * n];
        for (v, series) in per_voxel.into_iter().enumerate() {
            for (t, x) in series.into_iter().enumerate() {
                out[t * n + v] = x;
            }
        }
        VoxelMotion::new(t_len, n, self.fps, out).expect("reconstruction is finite and rest-zeroed")
    }
}

fn check_bins(bins: usize, frames: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::InvalidArgument("at least one frequency bin is required".into()));
    }
    if bins > frames / 2 {
        return Err(Error::InvalidArgument(format!(
            "K = {bins} exceeds ⌊T/2⌋ = {} for T = {frames}",
            frames / 2
        )));
    }
    Ok(())
}

/// Forward DFT of each voxel/axis series, keeping bins `0..K`.
pub fn fft_compress(
    motion: &VoxelMotion,
    grid: Arc<SparseVoxelGrid>,
    bins: usize,
    fps: f64,
) -> Result<SparseVoxelSpectrum> {
    let t_len = motion.frames();
    if t_len < 4 {
        return Err(Error::InvalidArgument(format!("compression needs T ≥ 4, got {t_len}")));
    }
    check_bins(bins, t_len)?;
    if motion.voxel_count() != grid.voxel_count() {
        return Err(Error::Mismatch(format!(
            "voxel motion has {} voxels, grid has {}",
            motion.voxel_count(),
            grid.voxel_count()
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t_len);
    let n = motion.voxel_count();
    let coefficients: Vec<Coeff3> = (0..n)
        .into_par_iter()
        .flat_map_iter(|v| {
            let mut spectra = [Vec::new(), Vec::new(), Vec::new()];
            for (axis, buf) in spectra.iter_mut().enumerate() {
                *buf = motion
                    .series(v, axis)
                    .into_iter()
                    .map(|x| Complex64::new(x, 0.0))
                    .collect();
                fft.process(buf);
            }
            (0..bins)
                .map(|k| [spectra[0][k], spectra[1][k], spectra[2][k]])
                .collect::<Vec<_>>()
        })
        .collect();
    SparseVoxelSpectrum::new(grid, bins, t_len, fps, coefficients)
}

/// `Dev(iFFT(S))`: reconstruct per-vertex motion from a spectrum on `grid`.
pub fn reconstruct_motion(spectrum: &SparseVoxelSpectrum, grid: &SparseVoxelGrid) -> Result<MotionSequence> {
    if !spectrum.grid().same_layout(grid) {
        return Err(Error::Mismatch(format!(
            "spectrum was built on a grid with {} voxels / {} vertices, got {} / {}",
            spectrum.voxel_count(),
            spectrum.grid().vertex_count(),
            grid.voxel_count(),
            grid.vertex_count()
        )));
    }
    grid.devoxelize_motion(&spectrum.reconstruct_voxels())
}

/// Fraction of non-DC spectral energy at or above bin `cutoff`.
///
/// Energy is taken over the one-sided spectrum `k = 1..=⌊T/2⌋` with each
/// non-Nyquist bin counted twice (it stands for its conjugate), summed over
/// voxels and axes. Static motion returns 0.
pub fn hf_energy_ratio(motion: &VoxelMotion, cutoff: usize) -> Result<f64> {
    let t_len = motion.frames();
    let half = t_len / 2;
    if cutoff > half {
        return Err(Error::InvalidArgument(format!(
            "cutoff bin {cutoff} exceeds ⌊T/2⌋ = {half}"
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t_len);
    let (high, total) = (0..motion.voxel_count())
        .into_par_iter()
        .map(|v| {
            let mut high = 0.0;
            let mut total = 0.0;
            for axis in 0..3 {
                let mut buf: Vec<Complex64> = motion
                    .series(v, axis)
                    .into_iter()
                    .map(|x| Complex64::new(x, 0.0))
                    .collect();
                fft.process(&mut buf);
                for (k, z) in buf.iter().enumerate().take(half + 1).skip(1) {
                    let w = if 2 * k == t_len { 1.0 } else { 2.0 };
                    let e = w * z.norm_sqr();
                    total += e;
                    if k >= cutoff {
                        high += e;
                    }
                }
            }
            (high, total)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Ok(if total > 0.0 { (high / total).clamp(0.0, 1.0) } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(T) DFT of one bin.
    fn dft_bin(x: &[f64], k: usize) -> Complex64 {
        let t_len = x.len();
        x.iter()
            .enumerate()
            .map(|(t, &v)| {
                let ph = -TAU * ((k * t) % t_len) as f64 / t_len as f64;
                Complex64::new(v * ph.cos(), v * ph.sin())
            })
            .sum()
    }

    fn single_voxel() -> Arc<SparseVoxelGrid> {
        Arc::new(SparseVoxelGrid::from_points(&[Vec3::zeros()], 2).unwrap())
    }

    fn motion_from_x(x: &[f64]) -> VoxelMotion {
        let d = x.iter().map(|&v| Vec3::new(v, 0.0, 0.0)).collect();
        VoxelMotion::new(x.len(), 1, 24.0, d).unwrap()
    }

    #[test]
    fn dft_oracle_values() {
        // cos(2π·3t/100) sampled from t = 0 is 1 at the rest frame, so shift
        // the expectation: rest-zeroing happens only on reconstruction.
        let t_len = 100;
        let cos3: Vec<f64> = (0..t_len).map(|t| (TAU * 3.0 * t as f64 / 100.0).cos()).collect();
        assert!((dft_bin(&cos3, 3) - Complex64::new(50.0, 0.0)).norm() < 1e-9);
        let sin2: Vec<f64> = (0..t_len).map(|t| (TAU * 2.0 * t as f64 / 100.0).sin()).collect();
        assert!((dft_bin(&sin2, 2) - Complex64::new(0.0, -50.0)).norm() < 1e-9);
    }

    #[test]
    fn compress_sine_bin2() {
        let x: Vec<f64> = (0..100).map(|t| (TAU * 2.0 * t as f64 / 100.0).sin()).collect();
        let s = fft_compress(&motion_from_x(&x), single_voxel(), 16, 24.0).unwrap();
        let c = s.coefficient(0, 2)[0];
        assert!((c - Complex64::new(0.0, -50.0)).norm() < 1e-9, "{c}");
        for k in (0..16).filter(|&k| k != 2) {
            assert!(s.coefficient(0, k)[0].norm() < 1e-9);
        }
    }

    #[test]
    fn compress_cosine_bin3_minus_rest() {
        // x(t) = cos(2π·3t/T) − 1 satisfies the rest-frame rule; its bin 3 is
        // the cosine's 50, and bin 0 carries −T.
        let x: Vec<f64> = (0..100).map(|t| (TAU * 3.0 * t as f64 / 100.0).cos() - 1.0).collect();
        let s = fft_compress(&motion_from_x(&x), single_voxel(), 16, 24.0).unwrap();
        assert!((s.coefficient(0, 3)[0] - Complex64::new(50.0, 0.0)).norm() < 1e-9);
        assert!((s.coefficient(0, 0)[0] - Complex64::new(-100.0, 0.0)).norm() < 1e-9);
        for k in [1, 2, 4, 5, 15] {
            assert!(s.coefficient(0, k)[0].norm() < 1e-9);
        }
    }

    #[test]
    fn zero_motion_zero_spectrum() {
        let s = fft_compress(&motion_from_x(&[0.0; 40]), single_voxel(), 8, 24.0).unwrap();
        assert!(s.coefficients().iter().all(|c| c.iter().all(|z| z.norm() == 0.0)));
        let rec = s.reconstruct_voxels();
        assert!(rec.displacements().iter().all(|d| *d == Vec3::zeros()));
    }

    #[test]
    fn too_many_bins() {
        assert!(fft_compress(&motion_from_x(&[0.0; 20]), single_voxel(), 11, 24.0).is_err());
        assert!(fft_compress(&motion_from_x(&[0.0; 20]), single_voxel(), 10, 24.0).is_ok());
        assert!(fft_compress(&motion_from_x(&[0.0; 3]), single_voxel(), 1, 24.0).is_err());
    }

    #[test]
    fn band_limited_roundtrip() {
        let t_len = 100;
        let f = |t: usize| {
            let t = t as f64 / t_len as f64;
            0.3 * (TAU * t).cos() - 0.7 * (TAU * 2.0 * t).sin() + 0.2 * (TAU * 3.0 * t + 0.4).cos()
        };
        let x: Vec<f64> = (0..t_len).map(|t| f(t) - f(0)).collect();
        let s = fft_compress(&motion_from_x(&x), single_voxel(), 16, 24.0).unwrap();
        let rec = s.reconstruct_voxels().series(0, 0);
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = x.iter().zip(&rec).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err / peak < 1e-6, "{err}");
    }

    #[test]
    fn hf_ratio_tones() {
        let tone = |k: f64| -> Vec<f64> { (0..100).map(|t| (TAU * k * t as f64 / 100.0).sin()).collect() };
        assert!(hf_energy_ratio(&motion_from_x(&tone(2.0)), 16).unwrap() < 1e-20);
        assert!((hf_energy_ratio(&motion_from_x(&tone(40.0)), 16).unwrap() - 1.0).abs() < 1e-12);
        let both: Vec<f64> = tone(2.0).iter().zip(tone(40.0)).map(|(a, b)| a + b).collect();
        assert!((hf_energy_ratio(&motion_from_x(&both), 16).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(hf_energy_ratio(&motion_from_x(&[0.0; 100]), 16).unwrap(), 0.0);
        assert!(hf_energy_ratio(&motion_from_x(&[0.0; 100]), 51).is_err());
    }

    #[test]
    fn reconstruct_rejects_foreign_grid() {
        let s = SparseVoxelSpectrum::zeros(single_voxel(), 4, 10, 24.0).unwrap();
        let other = SparseVoxelGrid::from_points(&[Vec3::zeros(), Vec3::x()], 2).unwrap();
        assert!(matches!(reconstruct_motion(&s, &other), Err(Error::Mismatch(_))));
        assert!(reconstruct_motion(&s, &single_voxel()).is_ok());
    }
}
