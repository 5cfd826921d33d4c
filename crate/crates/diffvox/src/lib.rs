//! Sparse-view cone-beam CT reconstruction by direct gradient-based
//! optimization of a voxelgrid through physics-based differentiable
//! X-ray projectors.
//!
//! The crate exposes two forward projectors (Siddon's exact voxel
//! traversal and trilinear-interpolation quadrature) together with
//! their exact adjoints, an Adam-based reconstruction loop with
//! total-variation regularization, image fidelity metrics, synthetic
//! phantoms, and raw-file volume/projection I/O.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod phantoms;
pub mod renderer;

pub use error::{DiffVoxError, Result};
pub use geometry::{Ray, ScanGeometry};
pub use grid::VoxelGrid;
