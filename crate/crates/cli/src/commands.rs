use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;
use spectree_core::engine::{displaced, pinned_instance, run_bench, BenchReport};
use spectree_core::spectrum::{
    fft_compress, hf_energy_ratio, lss_metric, read_motion, read_svsp, reconstruct_motion, write_motion, write_svsp,
};
use spectree_core::splat::export_splats;
use spectree_core::synth::{curate, synthesize, SynthParams};
use spectree_core::{load_mesh, save_mesh, Error, GaussianCloud, SessionConfig, SparseVoxelGrid, TriMesh};

use crate::config::set;
use crate::{AnimateArgs, BenchArgs, CompressArgs, SynthArgs, UsageError};

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|source| {
        Error::File {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Pretty JSON to `path`, compact JSON to stdout.
fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    if let Some(path) = path {
        fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<TriMesh> {
    let loaded = load_mesh(path)?;
    if loaded.dropped_faces > 0 {
        log::warn!("{}: dropped {} degenerate faces", path.display(), loaded.dropped_faces);
    }
    Ok(loaded.mesh)
}

#[derive(Debug, Serialize)]
struct SampleEntry {
    seed: u64,
    hf_ratio: f64,
    accepted: bool,
    /// Subdirectory holding the sample, when accepted.
    dir: Option<String>,
}

#[derive(Debug, Serialize)]
struct SynthReport {
    resolution: u32,
    cutoff: usize,
    threshold: f64,
    accepted: usize,
    rejected: usize,
    samples: Vec<SampleEntry>,
}

pub fn synth(base: &SessionConfig, args: SynthArgs) -> anyhow::Result<()> {
    let params = SynthParams::from_json(&read_text(&args.params)?)
        .with_context(|| format!("reading {}", args.params.display()))?;
    if args.count == 0 {
        return Err(UsageError("--count must be at least 1".into()).into());
    }
    let first = args.seed.unwrap_or(params.seed);
    let resolution = args.resolution.unwrap_or(base.resolution);
    create_dir(&args.out_dir)?;

    let mut samples = Vec::with_capacity(args.count);
    for i in 0..args.count as u64 {
        let seed = first.wrapping_add(i);
        let p = SynthParams {
            seed,
            ..params.clone()
        };
        let sample = synthesize(&p)?;
        let grid = SparseVoxelGrid::build(&sample.mesh, resolution)?;
        let verdict = curate(&sample.motion, &grid, args.cutoff, args.threshold)?;
        let dir = if verdict.accepted {
            let name = format!("sample_{seed:06}");
            let dir = args.out_dir.join(&name);
            create_dir(&dir)?;
            save_mesh(&sample.mesh, dir.join(format!("mesh.{}", args.mesh_format)))?;
            write_motion(&sample.motion, dir.join("motion.motn"))?;
            fs::write(dir.join("params.json"), serde_json::to_string_pretty(&p)? + "\n")?;
            Some(name)
        } else {
            None
        };
        log::info!(
            "seed {seed}: {} vertices, hf ratio {:.4} → {}",
            sample.mesh.vertex_count(),
            verdict.hf_ratio,
            if verdict.accepted { "accepted" } else { "rejected" }
        );
        samples.push(SampleEntry {
            seed,
            hf_ratio: verdict.hf_ratio,
            accepted: verdict.accepted,
            dir,
        });
    }
    let accepted = samples.iter().filter(|s| s.accepted).count();
    let report = SynthReport {
        resolution,
        cutoff: args.cutoff,
        threshold: args.threshold,
        accepted,
        rejected: samples.len() - accepted,
        samples,
    };
    emit(&report, Some(&args.out_dir.join("report.json")))
}

#[derive(Debug, Serialize)]
struct CompressReport {
    vertices: usize,
    voxels: usize,
    resolution: u32,
    bins: usize,
    frames: usize,
    fps: f64,
    /// High-frequency share of the voxelized motion above the kept bins.
    hf_ratio: f64,
    lss: Option<f64>,
    /// Relative L2 error against the voxel-shared motion.
    reconstruction_error: f64,
    /// Relative L2 error against the per-vertex input.
    source_error: f64,
    bytes: u64,
}

pub fn compress(base: &SessionConfig, args: CompressArgs) -> anyhow::Result<()> {
    let mesh = load(&args.mesh)?;
    let motion = read_motion(&args.motion)?;
    let mut cfg = *base;
    set(&mut cfg.bins, args.bins);
    set(&mut cfg.resolution, args.resolution);
    let fps = args.fps.unwrap_or(motion.fps());
    if motion.vertex_count() != mesh.vertex_count() {
        return Err(Error::Mismatch(format!(
            "motion has {} vertices, mesh has {}",
            motion.vertex_count(),
            mesh.vertex_count()
        ))
        .into());
    }
    let grid = Arc::new(SparseVoxelGrid::build(&mesh, cfg.resolution)?);
    let voxels = grid.voxelize_motion(&motion)?;
    let spectrum = fft_compress(&voxels, grid.clone(), cfg.bins, fps)?;
    write_svsp(&spectrum, &args.out)?;
    log::info!(
        "{} vertices → {} voxels × {} bins at R = {}",
        mesh.vertex_count(),
        grid.voxel_count(),
        cfg.bins,
        cfg.resolution
    );
    if !args.report {
        return Ok(());
    }
    let reconstructed = reconstruct_motion(&spectrum, &grid)?;
    let lss = if cfg.lss.kappa < grid.voxel_count() {
        Some(lss_metric(&spectrum, &grid.voxel_centers(), &cfg.lss)?)
    } else {
        None
    };
    let report = CompressReport {
        vertices: mesh.vertex_count(),
        voxels: grid.voxel_count(),
        resolution: cfg.resolution,
        bins: cfg.bins,
        frames: motion.frames(),
        fps,
        hf_ratio: hf_energy_ratio(&voxels, cfg.bins.min(motion.frames() / 2))?,
        lss,
        reconstruction_error: reconstructed.relative_l2_error(&grid.devoxelize_motion(&voxels)?)?,
        source_error: reconstructed.relative_l2_error(&motion)?,
        bytes: fs::metadata(&args.out)?.len(),
    };
    emit(&report, None)
}

#[derive(Debug, Serialize)]
struct AnimateReport {
    frames: usize,
    vertices: usize,
    faces: usize,
    per_face: usize,
    primitives: usize,
    /// Largest vertex displacement over the sequence.
    max_displacement: f64,
    /// Most splats frozen on degenerate faces in any frame.
    max_frozen: usize,
}

pub fn animate(base: &SessionConfig, args: AnimateArgs) -> anyhow::Result<()> {
    let mesh = load(&args.mesh)?;
    let spectrum = read_svsp(&args.spectrum)?
        .into_spectrum(&mesh)
        .with_context(|| format!("attaching {} to {}", args.spectrum.display(), args.mesh.display()))?;
    let per_face = args.per_face.unwrap_or(base.per_face);
    let motion = reconstruct_motion(&spectrum, spectrum.grid())?;
    create_dir(&args.out_dir)?;
    write_motion(&motion, args.out_dir.join("motion.motn"))?;

    let max_displacement = motion.displacements().iter().map(|d| d.norm()).fold(0.0, f64::max);
    let mut primitives = 0;
    let mut max_frozen = 0;
    if per_face > 0 {
        let cloud = GaussianCloud::bind(&mesh, per_face)?;
        primitives = cloud.len();
        for t in 0..motion.frames() {
            let pose = cloud.pose(&displaced(mesh.vertices(), motion.frame(t)))?;
            max_frozen = max_frozen.max(pose.frozen_count());
            export_splats(&cloud, &pose, args.out_dir.join(format!("frame_{t:04}.ply")))?;
        }
    }
    let report = AnimateReport {
        frames: motion.frames(),
        vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
        per_face,
        primitives,
        max_displacement,
        max_frozen,
    };
    emit(&report, Some(&args.out_dir.join("report.json")))
}

fn print_table(r: &BenchReport) {
    println!(
        "pinned instance: N = {}, n = {}, faces = {}, splats = {}, K = {}, {} frames, {} threads",
        r.vertices, r.voxels, r.faces, r.primitives, r.bins, r.frames, r.threads
    );
    println!("{:<12} {:>10} {:>10} {:>10} {:>10}", "stage", "median ms", "p95 ms", "mean ms", "max ms");
    for (name, s) in [
        ("modal", &r.modal),
        ("devoxelize", &r.devoxelize),
        ("mesh motion", &r.mesh_motion),
        ("pose", &r.pose),
        ("total", &r.total),
    ] {
        println!(
            "{name:<12} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            s.median_ms, s.p95_ms, s.mean_ms, s.max_ms
        );
    }
    println!(
        "budgets: mesh motion {} ms, pose {} ms, tolerance ×{} → {}",
        r.mesh_motion_budget_ms,
        r.pose_budget_ms,
        r.tolerance,
        if r.within_budget { "within budget" } else { "over budget" }
    );
}

pub fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let instance = pinned_instance(args.seed)?;
    let report = run_bench(&instance, args.frames, args.warmup)?;
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    if args.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print_table(&report);
    }
    Ok(())
}
