//! Real-time tree dynamics on a sparse voxel spectrum.
//!
//! Long tree motion is stored as a truncated per-voxel temporal spectrum.
//! The same spectrum reconstructs dense mesh motion, drives Gaussian
//! primitives bound to mesh faces, and doubles as a modal basis for
//! interactive force response.
//!
//! Module map:
//!
//! - [`mesh`]: triangle meshes, motion sequences, OBJ/PLY I/O
//! - [`knn`]: exact k-nearest-neighbour queries
//! - [`voxel`]: sparse voxel grid, voxelization and devoxelization
//! - [`spectrum`]: temporal DFT compression, reconstruction, LSS metric
//! - [`synth`]: procedural trees and oscillator-driven wind sway
//! - [`modal`]: modal bank, force projection, integration, superposition
//! - [`splat`]: face-bound Gaussians and their per-frame poses
//! - [`engine`]: offline and interactive pipelines with timing

pub mod engine;
mod error;
pub mod geom;
pub mod knn;
pub mod mesh;
pub mod modal;
pub mod ply;
pub mod spectrum;
pub mod splat;
pub mod synth;
pub mod voxel;

pub use engine::{Frame, InteractiveSession, LiveSession, SessionConfig};
pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
pub use mesh::{load_mesh, save_mesh, LoadedMesh, MotionSequence, TriMesh};
pub use modal::{ForceEvent, Integrator, ModalBank, ModalState};
pub use spectrum::{LssConfig, SparseVoxelSpectrum};
pub use splat::GaussianCloud;
pub use voxel::{SparseVoxelGrid, VoxelMotion};
