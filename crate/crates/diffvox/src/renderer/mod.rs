//! Differentiable X-ray projectors.
//!
//! Two forward models compute negative-log intensities of rays through
//! a voxelgrid: Siddon's exact voxel traversal and trilinear
//! interpolation with rectangular-rule quadrature. Both are linear in
//! the voxel values, so their exact gradients are the transposes of the
//! forward maps (the adjoints).

mod siddon;
mod trilinear;

pub use siddon::{siddon_adjoint, siddon_forward};
pub use trilinear::{trilinear_adjoint, trilinear_forward};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Ray;
use crate::grid::VoxelGrid;

/// Negative-log intensities, one per input ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    pub intensities: Vec<f64>,
}

/// Which forward model to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RendererKind {
    Siddon,
    Trilinear,
}

impl RendererKind {
    /// Forward render. `m_samples` is only consulted by the trilinear
    /// renderer.
    pub fn forward(&self, grid: &VoxelGrid, rays: &[Ray], m_samples: usize) -> Result<RenderResult> {
        match self {
            RendererKind::Siddon => Ok(siddon_forward(grid, rays)),
            RendererKind::Trilinear => trilinear_forward(grid, rays, m_samples),
        }
    }

    /// Adjoint of the forward map: scatters one upstream scalar per ray
    /// back into a gradient grid with the layout of `template`.
    pub fn adjoint(
        &self,
        template: &VoxelGrid,
        rays: &[Ray],
        m_samples: usize,
        upstream: &[f64],
    ) -> Result<VoxelGrid> {
        match self {
            RendererKind::Siddon => siddon_adjoint(template, rays, upstream),
            RendererKind::Trilinear => trilinear_adjoint(template, rays, m_samples, upstream),
        }
    }
}

impl std::str::FromStr for RendererKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "siddon" => Ok(RendererKind::Siddon),
            "trilinear" => Ok(RendererKind::Trilinear),
            other => Err(format!("unknown renderer '{other}' (expected siddon or trilinear)")),
        }
    }
}

impl std::fmt::Display for RendererKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RendererKind::Siddon => write!(f, "siddon"),
            RendererKind::Trilinear => write!(f, "trilinear"),
        }
    }
}

/// Intersection of the segment [s, p] with the grid's bounding box,
/// as a parameter interval [entry, exit] within [0, 1]. None if the
/// segment misses the box.
pub(crate) fn clip_to_box(grid: &VoxelGrid, ray: &Ray) -> Option<(f64, f64)> {
    let lo = grid.origin;
    let hi = grid.max_corner();
    let d = ray.direction();
    let mut entry = 0.0f64;
    let mut exit = 1.0f64;
    for a in 0..3 {
        if d[a].abs() < 1e-300 {
            // Parallel to this slab: inside or miss.
            if ray.source[a] < lo[a] || ray.source[a] > hi[a] {
                return None;
            }
        } else {
            let inv = 1.0 / d[a];
            let mut a0 = (lo[a] - ray.source[a]) * inv;
            let mut a1 = (hi[a] - ray.source[a]) * inv;
            if a0 > a1 {
                std::mem::swap(&mut a0, &mut a1);
            }
            entry = entry.max(a0);
            exit = exit.min(a1);
        }
    }
    if entry < exit {
        Some((entry, exit))
    } else {
        None
    }
}

/// Splits `n` items into contiguous chunk ranges, one per worker, so
/// adjoint scatter buffers can be reduced in a fixed order.
pub(crate) fn worker_chunks(n: usize) -> Vec<std::ops::Range<usize>> {
    let workers = rayon::current_num_threads().max(1);
    let chunk = n.div_ceil(workers).max(1);
    (0..n.div_ceil(chunk))
        .map(|i| i * chunk..((i + 1) * chunk).min(n))
        .collect()
}
