//! Approximate line integrals by trilinear interpolation at evenly
//! spaced samples with rectangular-rule quadrature.
//!
//! Samples span the ray's intersection with the grid bounding box.
//! Quadrature weights are trapezoid-style: half-weight at both ends,
//! so the weights sum exactly to the intersection interval. Samples
//! interpolate against zero outside the lattice of voxel centers.

use rayon::prelude::*;

use crate::error::{DiffVoxError, Result};
use crate::geometry::Ray;
use crate::grid::VoxelGrid;

use super::{clip_to_box, worker_chunks, RenderResult};

/// The 8 lattice corners and weights for trilinear interpolation at a
/// world point. Corners outside the grid are reported with weight but
/// no index (zero padding).
#[inline]
fn corners(grid: &VoxelGrid, point: [f64; 3]) -> [(Option<usize>, f64); 8] {
    // Continuous coordinates in units of voxels, relative to voxel centers.
    let mut base = [0isize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let q = (point[a] - grid.origin[a]) / grid.spacing[a] - 0.5;
        let f = q.floor();
        base[a] = f as isize;
        frac[a] = q - f;
    }
    let dims = [grid.dims[0] as isize, grid.dims[1] as isize, grid.dims[2] as isize];
    let mut out = [(None, 0.0); 8];
    for (c, slot) in out.iter_mut().enumerate() {
        let off = [(c & 1) as isize, ((c >> 1) & 1) as isize, ((c >> 2) & 1) as isize];
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            w *= if off[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            let i = base[a] + off[a];
            if i < 0 || i >= dims[a] {
                inside = false;
            } else {
                idx[a] = i as usize;
            }
        }
        *slot = (
            inside.then(|| grid.flat_index(idx[0], idx[1], idx[2])),
            w,
        );
    }
    out
}

/// Sample parameters and quadrature weights (in alpha units) for one
/// ray, or None when the ray misses the grid.
#[inline]
fn sample_plan(grid: &VoxelGrid, ray: &Ray, m_samples: usize) -> Option<(f64, f64, f64)> {
    let (entry, exit) = clip_to_box(grid, ray)?;
    let step = (exit - entry) / (m_samples as f64 - 1.0);
    Some((entry, exit, step))
}

fn check_m(m_samples: usize) -> Result<()> {
    if m_samples < 2 {
        return Err(DiffVoxError::InvalidArgument(format!(
            "m_samples must be at least 2, got {m_samples}"
        )));
    }
    Ok(())
}

/// Renders rays by interpolatory quadrature with `m_samples` evenly
/// spaced points over the ray's grid intersection.
pub fn trilinear_forward(grid: &VoxelGrid, rays: &[Ray], m_samples: usize) -> Result<RenderResult> {
    check_m(m_samples)?;
    let intensities = rays
        .par_iter()
        .map(|ray| {
            let Some((entry, _exit, step)) = sample_plan(grid, ray, m_samples) else {
                return 0.0;
            };
            let mut sum = 0.0;
            for m in 0..m_samples {
                let alpha = entry + m as f64 * step;
                let w = if m == 0 || m == m_samples - 1 { 0.5 * step } else { step };
                let point = ray.at(alpha);
                let mut mu = 0.0;
                for (idx, cw) in corners(grid, point) {
                    if let Some(idx) = idx {
                        mu += cw * grid.values[idx];
                    }
                }
                sum += mu * w;
            }
            sum * ray.length()
        })
        .collect();
    Ok(RenderResult { intensities })
}

/// Exact transpose of `trilinear_forward`: each sample scatters
/// `upstream * length * quadrature_weight` into its 8 corner voxels.
pub fn trilinear_adjoint(
    template: &VoxelGrid,
    rays: &[Ray],
    m_samples: usize,
    upstream: &[f64],
) -> Result<VoxelGrid> {
    check_m(m_samples)?;
    if rays.len() != upstream.len() {
        return Err(DiffVoxError::InvalidArgument(format!(
            "{} rays but {} upstream scalars",
            rays.len(),
            upstream.len()
        )));
    }
    let chunks = worker_chunks(rays.len());
    let partials: Vec<Vec<f64>> = chunks
        .into_par_iter()
        .map(|range| {
            let mut buf = vec![0.0; template.len()];
            for i in range {
                let ray = &rays[i];
                let Some((entry, _exit, step)) = sample_plan(template, ray, m_samples) else {
                    continue;
                };
                let coef = upstream[i] * ray.length();
                for m in 0..m_samples {
                    let alpha = entry + m as f64 * step;
                    let w = if m == 0 || m == m_samples - 1 { 0.5 * step } else { step };
                    let point = ray.at(alpha);
                    for (idx, cw) in corners(template, point) {
                        if let Some(idx) = idx {
                            buf[idx] += coef * w * cw;
                        }
                    }
                }
            }
            buf
        })
        .collect();

    let mut grad = template.zeros_like();
    for buf in partials {
        for (g, b) in grad.values.iter_mut().zip(buf) {
            *g += b;
        }
    }
    Ok(grad)
}
