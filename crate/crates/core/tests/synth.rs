mod common;

use std::f64::consts::TAU;

use num_complex::Complex64;
use spectree_core::synth::{
    curate, grow_tree, simulate_wind, skin_motion, synthesize, BranchNode, BranchSkeleton, Flutter, Gust, SynthParams,
    WindField, DEFAULT_HF_CUTOFF, DEFAULT_HF_THRESHOLD,
};
use spectree_core::{Error, MotionSequence, SparseVoxelGrid, Vec3};

fn single_branch(k: f64, c: f64, inertia: f64) -> BranchSkeleton {
    let trunk = BranchNode::new(None, 0, Vec3::zeros(), Vec3::y(), 1.0, 0.1, 1.0, 1.0, 1.0).unwrap();
    let branch = BranchNode::new(Some(0), 1, Vec3::y(), Vec3::x(), 0.5, 0.05, k, c, inertia).unwrap();
    BranchSkeleton::new(
        vec![trunk, branch],
        Vec::new(),
        Flutter {
            amplitude: 0.0,
            frequency_hz: 1.0,
        },
    )
    .unwrap()
}

fn subtree_size(s: &BranchSkeleton, node: usize) -> usize {
    1 + (0..s.node_count())
        .filter(|&i| s.nodes[i].parent == Some(node))
        .map(|i| subtree_size(s, i))
        .sum::<usize>()
}

#[test]
fn node_count_matches_recursive_oracle() {
    for seed in 0..20 {
        let params = SynthParams {
            depth: 3,
            branches_per_node: [2, 3],
            ..SynthParams::example(seed)
        };
        let (s, mesh, skin) = grow_tree(&params).unwrap();
        let n = s.node_count();
        assert!((1 + 2 + 4..=1 + 3 + 9 + 27).contains(&n), "seed {seed}: {n} nodes");
        assert_eq!(subtree_size(&s, 0), n);
        for i in 0..n {
            let children = s.nodes.iter().filter(|c| c.parent == Some(i)).count();
            if s.nodes[i].level + 1 < params.depth {
                assert!((2..=3).contains(&children), "node {i} has {children} children");
            } else {
                assert_eq!(children, 0);
            }
        }
        assert_eq!(skin.node.len(), mesh.vertex_count());
        assert!(skin.node.iter().all(|&j| (j as usize) < n));
    }
}

#[test]
fn synthesis_is_deterministic() {
    let p = SynthParams::example(21);
    let (a, b) = (synthesize(&p).unwrap(), synthesize(&p).unwrap());
    assert_eq!(a.mesh.vertices(), b.mesh.vertices());
    assert_eq!(a.motion, b.motion);
    let other = synthesize(&SynthParams::example(22)).unwrap();
    assert_ne!(a.mesh.vertices(), other.mesh.vertices());
}

#[test]
fn sinusoidal_gust_matches_transfer_function() {
    let (k, inertia, zeta): (f64, f64, f64) = (2.0, 0.05, 0.2);
    let c = 2.0 * zeta * (k * inertia).sqrt();
    let s = single_branch(k, c, inertia);
    let node = &s.nodes[1];
    let (mean, gust) = (3.0, 0.3);
    let fps = 2000.0;
    let settle = 10.0 / (c / (2.0 * inertia));
    let f0 = (k / inertia).sqrt() / TAU;
    for f in [0.4 * f0, f0, 2.5 * f0] {
        let wind = WindField {
            direction: [0.0, 0.0, 1.0],
            speed: mean,
            gusts: vec![Gust {
                amplitude: gust,
                frequency_hz: f,
                phase: 0.0,
            }],
            turbulence: 0.0,
            ..WindField::calm()
        };
        // ½ s|s| with s = S + g sin ωt has fundamental S·g; d × ŵ = x × z = −y.
        let force = mean * gust * node.drag_area();
        let w = TAU * f;
        let want = force / Complex64::new(k - inertia * w * w, c * w).norm();

        let periods = 10.0;
        let window = (periods / f * fps).round() as usize;
        let frames = (settle * fps) as usize + window + 1;
        let tr = simulate_wind(&s, &wind, frames, fps).unwrap();
        // Fundamental of the deflection along −y over whole periods.
        let start = frames - window;
        let mut acc = Complex64::default();
        for frame in start..frames {
            let y = -tr.bend_vector(&s, frame, 1).y;
            acc += Complex64::from_polar(y, -w * frame as f64 / fps);
        }
        let got = 2.0 * acc.norm() / window as f64;
        assert!((got - want).abs() <= 0.05 * want, "f = {f:.3} Hz: {got} vs {want}");
    }
}

#[test]
fn root_never_moves_and_motion_is_continuous() {
    let p = SynthParams::example(5);
    let sample = synthesize(&p).unwrap();
    let (mesh, motion) = (&sample.mesh, &sample.motion);
    for t in 0..motion.frames() {
        for (i, d) in motion.frame(t).iter().enumerate() {
            if sample.skinning.node[i] == 0 && sample.skinning.leaf[i].is_none() {
                assert_eq!(*d, Vec3::zeros());
            }
        }
    }
    let span = mesh.aabb().diagonal();
    let dt = 1.0 / p.fps;
    let flutter_rate = sample.skeleton.flutter.amplitude * TAU * sample.skeleton.flutter.frequency_hz;
    let bound = dt * (p.depth as f64 * sample.trajectories.max_rate() + flutter_rate) * span;
    assert!(bound.is_finite() && bound > 0.0);
    for t in 1..motion.frames() {
        let jump = common::max_abs_diff(motion.frame(t), motion.frame(t - 1));
        assert!(jump <= bound, "frame {t}: {jump} > {bound}");
    }
}

#[test]
fn energy_decays_once_wind_stops() {
    let p = SynthParams::example(6);
    let (s, _, _) = grow_tree(&p).unwrap();
    let stop = 2.0;
    let wind = WindField {
        until: Some(stop),
        ..p.wind.clone()
    };
    let tr = simulate_wind(&s, &wind, 200, p.fps).unwrap();
    let first = (stop * p.fps) as usize + 1;
    assert!(tr.energy(&s, first) > 0.0);
    for f in first + 1..200 {
        assert!(tr.energy(&s, f) <= tr.energy(&s, f - 1), "energy rose at frame {f}");
    }
}

#[test]
fn curation_accepts_clean_and_rejects_noisy() {
    for seed in 0..4 {
        let clean = synthesize(&SynthParams::example(seed)).unwrap();
        let grid = SparseVoxelGrid::build(&clean.mesh, 128).unwrap();
        let r = curate(&clean.motion, &grid, DEFAULT_HF_CUTOFF, DEFAULT_HF_THRESHOLD).unwrap();
        assert!(r.accepted, "{r:?}");
        let noisy = synthesize(&SynthParams {
            noise_amplitude: 1.0,
            ..SynthParams::example(seed)
        })
        .unwrap();
        let r = curate(&noisy.motion, &grid, DEFAULT_HF_CUTOFF, DEFAULT_HF_THRESHOLD).unwrap();
        assert!(!r.accepted && r.hf_ratio > DEFAULT_HF_THRESHOLD, "{r:?}");
    }
    let mesh = common::tree_mesh(1);
    let grid = SparseVoxelGrid::build(&mesh, 128).unwrap();
    let still = MotionSequence::zeros(100, mesh.vertex_count(), 24.0).unwrap();
    let r = curate(&still, &grid, 16, 0.1).unwrap();
    assert!(r.accepted && r.hf_ratio == 0.0);
}

#[test]
fn invalid_params_are_rejected() {
    for p in [
        SynthParams {
            depth: 0,
            ..SynthParams::example(0)
        },
        SynthParams {
            depth: 7,
            ..SynthParams::example(0)
        },
        SynthParams {
            branches_per_node: [3, 2],
            ..SynthParams::example(0)
        },
        SynthParams {
            length_decay: 1.5,
            ..SynthParams::example(0)
        },
    ] {
        assert!(matches!(grow_tree(&p), Err(Error::InvalidArgument(_))), "{p:?}");
    }
    let skel = single_branch(2.0, 0.2, 0.05);
    let motion = simulate_wind(&skel, &WindField::calm(), 1, 24.0);
    assert!(motion.is_err());
    let (s, mesh, mut skin) = grow_tree(&SynthParams::example(0)).unwrap();
    let tr = simulate_wind(&s, &WindField::calm(), 3, 24.0).unwrap();
    skin.node[0] = s.node_count() as u32;
    assert!(skin_motion(&s, &tr, &mesh, &skin).is_err());
}
