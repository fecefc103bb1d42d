//! Acceptance suite: one PASS/FAIL line per criterion, exact numbers in the
//! detail column. Runs without the libtest harness so the lines print in
//! order; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{E, TAU};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use spectree_core::engine::{
    pinned_instance, read_event_log, run_bench, run_interactive, EventRecorder, PayloadKind, DEFAULT_DT,
};
use spectree_core::modal::{ModalBank, ModalState};
use spectree_core::spectrum::{fft_compress, lss_metric, reconstruct_motion, smooth_spectrum};
use spectree_core::synth::{curate, synthesize, SynthParams};
use spectree_core::{
    GaussianCloud, InteractiveSession, Integrator, LssConfig, MotionSequence, SessionConfig, SparseVoxelGrid,
    SparseVoxelSpectrum, Vec3,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// 1. Band-limited motions survive compress → reconstruct.
fn spectrum_roundtrip() -> Outcome {
    let started = Instant::now();
    let mut rng = common::rng(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let nv = rng.random_range(200..800);
        let mesh = common::random_mesh(&mut rng, nv, nv);
        let grid = Arc::new(SparseVoxelGrid::build(&mesh, 64).unwrap());
        let voxel = common::band_limited_voxel_motion(&mut rng, grid.voxel_count(), 100, 24.0, 16);
        let motion = grid.devoxelize_motion(&voxel).unwrap();
        let spectrum = fft_compress(&grid.voxelize_motion(&motion).unwrap(), grid.clone(), 16, 24.0).unwrap();
        let back = reconstruct_motion(&spectrum, &grid).unwrap();
        let peak = motion.displacements().iter().map(|d| d.amax()).fold(0.0, f64::max);
        worst = worst.max(common::max_abs_diff(back.displacements(), motion.displacements()) / peak);
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst <= 1e-6 && secs < 10.0,
        format!("worst relative L∞ {worst:.2e} (≤ 1e-6), {secs:.2} s (< 10 s)"),
    )
}

/// 2. Truncated spectra never hold more energy than the signal.
fn parseval_truncation() -> Outcome {
    let mut rng = common::rng(0x5eed_0002);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for _ in 0..50 {
        let voxels = rng.random_range(1..40);
        let points: Vec<Vec3> = (0..voxels).map(|i| Vec3::new(i as f64, (i * i) as f64, 0.0)).collect();
        let grid = Arc::new(SparseVoxelGrid::from_points(&points, 512).unwrap());
        let x = common::white_voxel_motion(&mut rng, grid.voxel_count(), 100, 24.0);
        let s = fft_compress(&x, grid.clone(), 16, 24.0).unwrap();
        for v in 0..grid.voxel_count() {
            for axis in 0..3 {
                let energy: f64 = x.series(v, axis).iter().map(|u| u * u).sum();
                worst_excess = worst_excess.max(s.retained_energy(v, axis) - energy);
                checked += 1;
            }
        }
    }
    check(
        worst_excess <= 1e-9,
        format!("{checked} voxel/axis series, max(retained − original) = {worst_excess:.3e} (≤ 1e-9)"),
    )
}

/// A one-voxel, one-mode bank with ω = 2π (T = 4 frames at 4 fps, bin 1).
fn unit_oscillator(xi: f64) -> ModalBank {
    let grid = Arc::new(SparseVoxelGrid::from_points(&[Vec3::zeros()], 32).unwrap());
    let zero = Complex64::default();
    let coefficients = vec![[zero; 3], [Complex64::new(1.0, 0.0), zero, zero]];
    let spectrum = SparseVoxelSpectrum::new(grid, 2, 4, 4.0, coefficients).unwrap();
    ModalBank::build(&spectrum, xi).unwrap()
}

fn free_decay_error(bank: &ModalBank, integrator: Integrator) -> f64 {
    let (xi, w, dt): (f64, f64, f64) = (0.05, TAU, 1e-4);
    let wd = w * (1.0 - xi * xi).sqrt();
    let mut state = ModalState::zeros(1);
    state.q[0] = Complex64::new(1.0, 0.0);
    let (mut num, mut den) = (0.0, 0.0);
    for step in 1..=10_000 {
        bank.step_in_place(&mut state, &[Complex64::default()], dt, integrator).unwrap();
        let t = step as f64 * dt;
        let exact = (-xi * w * t).exp() * ((wd * t).cos() + xi * w / wd * (wd * t).sin());
        num += (state.q[0].re - exact).powi(2);
        den += exact * exact;
    }
    (num / den).sqrt()
}

fn steady_amplitude(bank: &ModalBank, integrator: Integrator, forcing: f64) -> f64 {
    let dt = 1e-4;
    let mut state = ModalState::zeros(1);
    let (settle, window) = (40.0, 2.0);
    let steps = ((settle + window) / dt) as usize;
    let mut peak = 0.0f64;
    for step in 0..steps {
        let f = Complex64::new((forcing * state.time).cos(), 0.0);
        bank.step_in_place(&mut state, &[f], dt, integrator).unwrap();
        if step as f64 * dt >= settle {
            peak = peak.max(state.q[0].re.abs());
        }
    }
    peak
}

/// 3. Free response against the closed form; resonance ratio against |H|.
fn modal_oracle() -> Outcome {
    let xi = 0.05;
    let bank = unit_oscillator(xi);
    let w = bank.omega(1);
    let h = |f: f64| 1.0 / Complex64::new(bank.stiffness(1) - bank.mass(1) * f * f, bank.damping(1) * f).norm();
    let analytic = h(w) / h(3.0 * w);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, integrator) in [("semi-implicit", Integrator::SemiImplicit), ("explicit", Integrator::Explicit)] {
        let err = free_decay_error(&bank, integrator);
        let ratio = steady_amplitude(&bank, integrator, w) / steady_amplitude(&bank, integrator, 3.0 * w);
        let rel = (ratio - analytic).abs() / analytic;
        ok &= err <= 1e-3 && rel <= 0.2;
        parts.push(format!(
            "{name}: free-decay rel L2 {err:.3e} (≤ 1e-3), resonance ratio {ratio:.2} vs {analytic:.2} ({:.1}% ≤ 20%)",
            100.0 * rel
        ));
    }
    check(ok, parts.join("; "))
}

/// 4. Unforced semi-implicit steps never raise modal energy.
fn energy_decay() -> Outcome {
    let mut rng = common::rng(0x5eed_0004);
    let mesh = common::random_mesh(&mut rng, 300, 200);
    let grid = Arc::new(SparseVoxelGrid::build(&mesh, 64).unwrap());
    let spectrum = common::random_spectrum(&mut rng, grid, 16, 100, 24.0);
    let bank = ModalBank::build(&spectrum, 0.05).unwrap();
    let zero = vec![Complex64::default(); bank.mode_count()];
    let mut violations = 0;
    let mut runs = 0;
    for dt in [1e-3, DEFAULT_DT] {
        for _ in 0..10 {
            let mut state = bank.zero_state();
            for i in 0..bank.mode_count() {
                state.q[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                state.q_dot[i] = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            }
            let mut energy = bank.modal_energy(&state);
            for _ in 0..1000 {
                bank.step_in_place(&mut state, &zero, dt, Integrator::SemiImplicit).unwrap();
                let next = bank.modal_energy(&state);
                if next > energy {
                    violations += 1;
                }
                energy = next;
            }
            runs += 1;
        }
    }
    check(
        violations == 0,
        format!(
            "{runs} runs × 1000 steps at dt = 1e-3 and {DEFAULT_DT:.5} (dt·ω_max = {:.3}): {violations} violations",
            DEFAULT_DT * bank.omega_max()
        ),
    )
}

/// 5. Splat poses follow rigid motions of the mesh.
fn binding_equivariance() -> Outcome {
    let mut rng = common::rng(0x5eed_0005);
    let mesh = common::tree_mesh(5);
    let cloud = GaussianCloud::bind(&mesh, 5).unwrap();
    let rest = cloud.rest_pose().clone();
    let (mut mean_err, mut rot_err, mut scale_err, mut shift_scale_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let r = common::random_rotation(&mut rng);
        let t = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let moved: Vec<Vec3> = mesh.vertices().iter().map(|p| r * p + t).collect();
        let pose = cloud.pose(&moved).unwrap();
        for i in 0..pose.len() {
            mean_err = mean_err.max((pose.means[i] - (r * rest.means[i] + t)).amax());
            rot_err = rot_err.max((pose.rotations[i] - r.matrix() * rest.rotations[i]).amax());
            scale_err = scale_err.max((pose.scales[i] - rest.scales[i]).amax());
        }
        let shifted: Vec<Vec3> = mesh.vertices().iter().map(|p| p + t).collect();
        let pose = cloud.pose(&shifted).unwrap();
        shift_scale_err = shift_scale_err.max(common::max_abs_diff(&pose.scales, &rest.scales));
    }
    check(
        mean_err <= 1e-6 && rot_err <= 1e-6 && scale_err <= 1e-6 && shift_scale_err <= 1e-9,
        format!(
            "{} splats × 100 motions: means {mean_err:.1e}, rotations {rot_err:.1e}, scales {scale_err:.1e} (≤ 1e-6); \
             translated scales {shift_scale_err:.1e} (≤ 1e-9)",
            rest.len()
        ),
    )
}

/// 6. Grid occupancy and voxel means against brute-force oracles.
fn voxel_oracle() -> Outcome {
    let mut rng = common::rng(0x5eed_0006);
    let mut mean_err = 0.0f64;
    let mut mismatches = 0;
    let mut total_voxels = 0;
    for case in 0..10 {
        let nv = rng.random_range(500..5000);
        let mesh = common::random_mesh(&mut rng, nv, nv / 2);
        let res = [32, 64, 128, 256, 512][case % 5];
        let grid = SparseVoxelGrid::build(&mesh, res).unwrap();

        let pts = mesh.vertices();
        let lo = pts.iter().fold(Vec3::repeat(f64::INFINITY), |a, p| a.inf(p));
        let hi = pts.iter().fold(Vec3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
        let size = (hi - lo).max() / res as f64;
        let origin = lo - Vec3::repeat(0.5 * size);
        let mut cells: BTreeMap<[u32; 3], Vec<usize>> = BTreeMap::new();
        for (i, p) in pts.iter().enumerate() {
            let c = [0, 1, 2].map(|a| ((p[a] - origin[a]) / size).floor().clamp(0.0, (res - 1) as f64) as u32);
            cells.entry(c).or_default().push(i);
        }
        let oracle: Vec<[u32; 3]> = cells.keys().copied().collect();
        if oracle != grid.occupied() {
            mismatches += 1;
        }
        for (cell, members) in &cells {
            if members.iter().any(|&i| grid.occupied()[grid.vertex_to_voxel()[i] as usize] != *cell) {
                mismatches += 1;
            }
        }
        total_voxels += grid.voxel_count();

        let motion = MotionSequence::from_fn(6, nv, 24.0, |_, _| {
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap();
        let vm = grid.voxelize_motion(&motion).unwrap();
        for t in 0..6 {
            for (v, members) in cells.values().enumerate() {
                let mean = members.iter().map(|&i| motion.frame(t)[i]).sum::<Vec3>() / members.len() as f64;
                mean_err = mean_err.max((vm.frame(t)[v] - mean).amax());
            }
        }
    }
    check(
        mismatches == 0 && mean_err <= 1e-12,
        format!("10 meshes, {total_voxels} voxels: {mismatches} occupancy mismatches, max mean error {mean_err:.1e} (≤ 1e-12)"),
    )
}

/// 7. LSS identities and monotone smoothing.
fn lss_identities() -> Outcome {
    let cfg = LssConfig::default();
    let mut rng = common::rng(0x5eed_0007);
    let mesh = common::random_mesh(&mut rng, 400, 200);
    let grid = Arc::new(SparseVoxelGrid::build(&mesh, 32).unwrap());
    let centers = grid.voxel_centers();
    let mut constant_max = 0.0f64;
    for _ in 0..5 {
        let c: Vec<[Complex64; 3]> = (0..4)
            .map(|_| [0; 3].map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let coeffs = (0..grid.voxel_count()).flat_map(|_| c.clone()).collect();
        let s = SparseVoxelSpectrum::new(grid.clone(), 4, 10, 24.0, coeffs).unwrap();
        constant_max = constant_max.max(lss_metric(&s, &centers, &cfg).unwrap());
    }

    let pair = [Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)];
    let pair_grid = Arc::new(SparseVoxelGrid::from_points(&pair, 32).unwrap());
    let im = Complex64::new(0.0, 0.3);
    let coeffs = vec![
        [Complex64::new(0.6, 0.0) + im, im, im],
        [im, Complex64::new(0.8, 0.0) + im, im],
    ];
    let two = SparseVoxelSpectrum::new(pair_grid, 1, 4, 24.0, coeffs).unwrap();
    let hand = lss_metric(&two, &pair, &LssConfig { kappa: 1, ..cfg }).unwrap();
    let hand_err = (hand - E.recip()).abs();

    let mut rises = 0;
    for _ in 0..10 {
        let mut s = common::random_spectrum(&mut rng, grid.clone(), 16, 100, 24.0);
        let mut value = lss_metric(&s, &centers, &cfg).unwrap();
        for _ in 0..10 {
            s = smooth_spectrum(&s, &centers, &cfg, 1, 0.05).unwrap();
            let next = lss_metric(&s, &centers, &cfg).unwrap();
            if next > value {
                rises += 1;
            }
            value = next;
        }
    }
    check(
        constant_max == 0.0 && hand_err <= 1e-12 && rises == 0,
        format!(
            "constant spectra max {constant_max:.1e}; two-voxel |value − e⁻¹| = {hand_err:.1e} (≤ 1e-12); \
             {rises} increases over 10 spectra × 10 steps"
        ),
    )
}

/// 8. Curation rejects noisy samples and keeps band-limited ones.
fn curation_filter() -> Outcome {
    let (mut rejected, mut premise_min, mut noisy_min) = (0, f64::INFINITY, f64::INFINITY);
    let (mut accepted, mut clean_max) = (0, 0.0f64);
    for seed in 0..20 {
        let clean = synthesize(&SynthParams::example(seed)).unwrap();
        let grid = Arc::new(SparseVoxelGrid::build(&clean.mesh, 128).unwrap());

        // Band-limited: the clean sway projected onto bins below 16.
        let spectrum = fft_compress(&grid.voxelize_motion(&clean.motion).unwrap(), grid.clone(), 16, 24.0).unwrap();
        let band_limited = reconstruct_motion(&spectrum, &grid).unwrap();
        let r = curate(&band_limited, &grid, 16, 0.1).unwrap();
        accepted += usize::from(r.accepted);
        clean_max = clean_max.max(r.hf_ratio);

        let noisy = synthesize(&SynthParams {
            noise_amplitude: 1.0,
            ..SynthParams::example(seed)
        })
        .unwrap();
        // Energy fraction above bin 16 of the injected sample, measured.
        let frac = spectree_core::spectrum::hf_energy_ratio(&grid.voxelize_motion(&noisy.motion).unwrap(), 17).unwrap();
        premise_min = premise_min.min(frac);
        let r = curate(&noisy.motion, &grid, 16, 0.1).unwrap();
        rejected += usize::from(!r.accepted);
        noisy_min = noisy_min.min(r.hf_ratio);
    }
    check(
        premise_min >= 0.3 && rejected == 20 && accepted == 20,
        format!(
            "noisy: fraction above bin 16 ≥ {premise_min:.3} (premise ≥ 0.3), {rejected}/20 rejected (min ratio {noisy_min:.3}); \
             band-limited: {accepted}/20 accepted (max ratio {clean_max:.1e})"
        ),
    )
}

/// 9. Per-stage medians on the pinned instance.
fn performance_budget() -> Outcome {
    let instance = pinned_instance(9).unwrap();
    let r = run_bench(&instance, 100, 10).unwrap();
    check(
        r.within_budget,
        format!(
            "N={} n={} splats={} K={} threads={}: mesh motion median {:.2} ms (p95 {:.2}; budget {} × {} ms), \
             splat pose median {:.2} ms (p95 {:.2}; budget {} × {} ms)",
            r.vertices,
            r.voxels,
            r.primitives,
            r.bins,
            r.threads,
            r.mesh_motion.median_ms,
            r.mesh_motion.p95_ms,
            r.tolerance,
            r.mesh_motion_budget_ms,
            r.pose.median_ms,
            r.pose.p95_ms,
            r.tolerance,
            r.pose_budget_ms
        ),
    )
}

/// 10. A recorded 10 s log replays to identical frames.
fn deterministic_replay() -> Outcome {
    let sample = synthesize(&SynthParams::example(10)).unwrap();
    let grid = Arc::new(SparseVoxelGrid::build(&sample.mesh, 128).unwrap());
    let spectrum = fft_compress(&grid.voxelize_motion(&sample.motion).unwrap(), grid.clone(), 16, 24.0).unwrap();
    let mesh = Arc::new(sample.mesh);
    let config = SessionConfig {
        payload: PayloadKind::Splats,
        ..SessionConfig::default()
    };
    let frames = (10.0 / config.dt).round() as usize;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let mut recorder = EventRecorder::create(&path).unwrap();
    let mut session = InteractiveSession::new(mesh.clone(), &spectrum, config).unwrap();
    let mut rng = common::rng(0x5eed_0010);
    let mut original = Vec::with_capacity(frames);
    for _ in 0..frames {
        if rng.random_bool(0.05) {
            let v = rng.random_range(0..grid.voxel_count());
            let f = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            recorder.record(session.apply_force(v, f, rng.random_range(0.05..0.5)).unwrap()).unwrap();
        }
        original.push(session.step().unwrap());
    }
    let events = read_event_log(std::fs::File::open(&path).unwrap()).unwrap();
    let first = run_interactive(mesh.clone(), &spectrum, config, &events, frames).unwrap();
    let second = run_interactive(mesh, &spectrum, config, &events, frames).unwrap();
    let same = |a: &[spectree_core::Frame], b: &[spectree_core::Frame]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_content(y))
    };
    let moving = original.iter().any(|f| f.payload != original[0].payload);
    check(
        same(&first, &second) && same(&first, &original) && moving,
        format!(
            "{} events over {frames} frames ({} floats each): replays identical = {}, match live run = {}",
            events.len(),
            first[0].payload.len(),
            same(&first, &second),
            same(&first, &original)
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("spectrum roundtrip", spectrum_roundtrip),
        ("Parseval truncation", parseval_truncation),
        ("modal oracle", modal_oracle),
        ("energy decay", energy_decay),
        ("binding equivariance", binding_equivariance),
        ("voxel oracle", voxel_oracle),
        ("LSS identities", lss_identities),
        ("curation filter", curation_filter),
        ("performance budget", performance_budget),
        ("deterministic replay", deterministic_replay),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} [{tag}] {name} ({secs:.1} s): {detail}");
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
