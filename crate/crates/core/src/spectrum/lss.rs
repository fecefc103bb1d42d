//! Local spectrum smoothness: a distance-weighted discrepancy between each
//! voxel's spectrum and those of its nearest neighbours, plus a descent
//! smoother that lowers it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Coeff3, SparseVoxelSpectrum};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::knn::KdTree;

/// Maximum number of step halvings tried before a descent step is skipped.
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LssConfig {
    /// Neighbours per voxel.
    pub kappa: usize,
    /// Distance decay, per model unit.
    pub alpha: f64,
    /// Weight of the imaginary-part discrepancy.
    pub lambda: f64,
}

impl Default for LssConfig {
    fn default() -> Self {
        Self {
            kappa: 5,
            alpha: 0.5,
            lambda: 0.5,
        }
    }
}

impl LssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::InvalidArgument("LSS needs κ ≥ 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "LSS needs finite α, λ ≥ 0, got α = {}, λ = {}",
                self.alpha, self.lambda
            )));
        }
        Ok(())
    }
}

/// Directed κ-NN graph with edge weights `exp(−α·d_ij)`.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    kappa: usize,
    /// `edges[i * κ + r] = (j, w_ij)` for the r-th neighbour of `i`.
    edges: Vec<(usize, f64)>,
}

impl NeighborGraph {
    pub fn build(positions: &[Vec3], cfg: &LssConfig) -> Result<Self> {
        cfg.validate()?;
        let n = positions.len();
        if cfg.kappa >= n {
            return Err(Error::InvalidArgument(format!(
                "LSS needs κ < n, got κ = {} with {n} voxel(s)",
                cfg.kappa
            )));
        }
        let tree = KdTree::build(positions);
        let per_site: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                tree.nearest_filtered(&positions[i], cfg.kappa, |j| j != i)
                    .map(|nb| nb.into_iter().map(|x| (x.index, (-cfg.alpha * x.distance).exp())).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            kappa: cfg.kappa,
            edges: per_site.into_iter().flatten().collect(),
        })
    }

    pub fn site_count(&self) -> usize {
        self.edges.len() / self.kappa
    }

    pub fn neighbors(&self, site: usize) -> &[(usize, f64)] {
        &self.edges[site * self.kappa..(site + 1) * self.kappa]
    }
}

fn check_positions(spectrum: &SparseVoxelSpectrum, positions: &[Vec3]) -> Result<()> {
    if positions.len() != spectrum.voxel_count() {
        return Err(Error::Mismatch(format!(
            "{} positions for {} voxels",
            positions.len(),
            spectrum.voxel_count()
        )));
    }
    Ok(())
}

/// `(‖Re_a − Re_b‖, ‖Im_a − Im_b‖)` over the concatenated components.
fn diff_norms(a: &[Coeff3], b: &[Coeff3]) -> (f64, f64) {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for axis in 0..3 {
            let d = x[axis] - y[axis];
            re += d.re * d.re;
            im += d.im * d.im;
        }
    }
    (re.sqrt(), im.sqrt())
}

fn metric_on_graph(spectrum: &SparseVoxelSpectrum, graph: &NeighborGraph, lambda: f64) -> f64 {
    let n = spectrum.voxel_count();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let si = spectrum.voxel_bins(i);
            graph
                .neighbors(i)
                .iter()
                .map(|&(j, w)| {
                    let (re, im) = diff_norms(si, spectrum.voxel_bins(j));
                    w * (re + lambda * im)
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / n as f64
}

/// `(1/n) Σ_i Σ_{j∈κNN(i)} exp(−α d_ij)·(‖Re_i − Re_j‖ + λ‖Im_i − Im_j‖)`,
/// norms over all `3K` real (resp. imaginary) components of a voxel.
pub fn lss_metric(spectrum: &SparseVoxelSpectrum, positions: &[Vec3], cfg: &LssConfig) -> Result<f64> {
    check_positions(spectrum, positions)?;
    let graph = NeighborGraph::build(positions, cfg)?;
    Ok(metric_on_graph(spectrum, &graph, cfg.lambda))
}

/// The same discrepancy evaluated separately for each bin (norms over the 3
/// axes of that bin only). Diagnostic; does not sum to [`lss_metric`].
pub fn lss_per_bin(spectrum: &SparseVoxelSpectrum, positions: &[Vec3], cfg: &LssConfig) -> Result<Vec<f64>> {
    check_positions(spectrum, positions)?;
    let graph = NeighborGraph::build(positions, cfg)?;
    let n = spectrum.voxel_count();
    let k_len = spectrum.bins();
    let mut out = vec![0.0; k_len];
    for i in 0..n {
        let si = spectrum.voxel_bins(i);
        for &(j, w) in graph.neighbors(i) {
            let sj = spectrum.voxel_bins(j);
            for (k, slot) in out.iter_mut().enumerate() {
                let (re, im) = diff_norms(&si[k..k + 1], &sj[k..k + 1]);
                *slot += w * (re + cfg.lambda * im);
            }
        }
    }
    for v in &mut out {
        *v /= n as f64;
    }
    Ok(out)
}

/// Subgradient of the metric with respect to every coefficient. A pair with
/// zero difference contributes zero.
fn gradient(spectrum: &SparseVoxelSpectrum, graph: &NeighborGraph, lambda: f64) -> Vec<Coeff3> {
    let n = spectrum.voxel_count();
    let k_len = spectrum.bins();
    let mut grad = vec![[Complex64::default(); 3]; n * k_len];
    let scale = 1.0 / n as f64;
    for i in 0..n {
        let si = spectrum.voxel_bins(i);
        for &(j, w) in graph.neighbors(i) {
            let sj = spectrum.voxel_bins(j);
            let (re, im) = diff_norms(si, sj);
            let gr = if re > 0.0 { w * scale / re } else { 0.0 };
            let gi = if im > 0.0 { w * scale * lambda / im } else { 0.0 };
            if gr == 0.0 && gi == 0.0 {
                continue;
            }
            for k in 0..k_len {
                for axis in 0..3 {
                    let d = si[k][axis] - sj[k][axis];
                    let g = Complex64::new(gr * d.re, gi * d.im);
                    grad[i * k_len + k][axis] += g;
                    grad[j * k_len + k][axis] -= g;
                }
            }
        }
    }
    grad
}

/// `steps` iterations of subgradient descent on the metric. Each iteration
/// starts from `step_size` and halves it until the metric does not increase;
/// if no trial step qualifies the spectrum is left unchanged for that
/// iteration, so the metric is non-increasing across iterations.
pub fn smooth_spectrum(
    spectrum: &SparseVoxelSpectrum,
    positions: &[Vec3],
    cfg: &LssConfig,
    steps: usize,
    step_size: f64,
) -> Result<SparseVoxelSpectrum> {
    if steps == 0 {
        return Err(Error::InvalidArgument("smoothing needs at least one step".into()));
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size {step_size} must be positive")));
    }
    check_positions(spectrum, positions)?;
    let graph = NeighborGraph::build(positions, cfg)?;
    let mut current = spectrum.clone();
    let mut value = metric_on_graph(&current, &graph, cfg.lambda);
    for _ in 0..steps {
        let grad = gradient(&current, &graph, cfg.lambda);
        if grad.iter().any(|g| g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))) {
            return Err(Error::NonFinite("LSS gradient".into()));
        }
        if grad.iter().all(|g| g.iter().all(|z| z.norm_sqr() == 0.0)) {
            break;
        }
        let mut eta = step_size;
        for _ in 0..MAX_HALVINGS {
            let mut trial = current.clone();
            for (c, g) in trial.coefficients.iter_mut().zip(&grad) {
                for axis in 0..3 {
                    c[axis] -= g[axis] * eta;
                }
            }
            let trial_value = metric_on_graph(&trial, &graph, cfg.lambda);
            if trial_value <= value {
                current = trial;
                value = trial_value;
                break;
            }
            eta *= 0.5;
        }
    }
    Ok(current)
}
