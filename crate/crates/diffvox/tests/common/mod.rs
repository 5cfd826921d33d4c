//! Shared helpers and independent oracles for integration tests.
//!
//! Everything here deliberately avoids the library's traversal and
//! windowing code paths so it can serve as an independent check.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use diffvox::geometry::Ray;
use diffvox::grid::VoxelGrid;

/// Dense-sampling line-integral oracle: steps `n_samples` uniform
/// midpoints along the segment [s, p] and accumulates per-voxel
/// occupancy lengths. Independent of the Siddon traversal.
pub fn dense_sampling_integral(grid: &VoxelGrid, ray: &Ray, n_samples: usize) -> f64 {
    let d = ray.direction();
    let length = ray.length();
    let step = length / n_samples as f64;
    let hi = grid.max_corner();
    let mut total = 0.0;
    for i in 0..n_samples {
        let alpha = (i as f64 + 0.5) / n_samples as f64;
        let p = [
            ray.source[0] + alpha * d[0],
            ray.source[1] + alpha * d[1],
            ray.source[2] + alpha * d[2],
        ];
        if p[0] < grid.origin[0]
            || p[0] >= hi[0]
            || p[1] < grid.origin[1]
            || p[1] >= hi[1]
            || p[2] < grid.origin[2]
            || p[2] >= hi[2]
        {
            continue;
        }
        let i0 = ((p[0] - grid.origin[0]) / grid.spacing[0]) as usize;
        let j0 = ((p[1] - grid.origin[1]) / grid.spacing[1]) as usize;
        let k0 = ((p[2] - grid.origin[2]) / grid.spacing[2]) as usize;
        total += grid.at(i0.min(grid.dims[0] - 1), j0.min(grid.dims[1] - 1), k0.min(grid.dims[2] - 1)) * step;
    }
    total
}

/// Direct per-window SSIM oracle for 3D volumes: explicit loops over
/// every valid 7^3 window.
pub fn ssim3d_direct(a: &[f64], b: &[f64], dims: [usize; 3], dynamic_range: f64) -> f64 {
    let w = 7usize;
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);
    let [nx, ny, nz] = dims;
    let n = (w * w * w) as f64;
    let at = |f: &[f64], i: usize, j: usize, k: usize| f[i + nx * (j + ny * k)];
    let mut total = 0.0;
    let mut windows = 0usize;
    for k0 in 0..=(nz - w) {
        for j0 in 0..=(ny - w) {
            for i0 in 0..=(nx - w) {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for k in k0..k0 + w {
                    for j in j0..j0 + w {
                        for i in i0..i0 + w {
                            let x = at(a, i, j, k);
                            let y = at(b, i, j, k);
                            sa += x;
                            sb += y;
                            saa += x * x;
                            sbb += y * y;
                            sab += x * y;
                        }
                    }
                }
                let mu_a = sa / n;
                let mu_b = sb / n;
                let var_a = saa / n - mu_a * mu_a;
                let var_b = sbb / n - mu_b * mu_b;
                let cov = sab / n - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                windows += 1;
            }
        }
    }
    total / windows as f64
}

/// Random grid with values uniform in [0, max_value).
pub fn random_grid(dims: [usize; 3], spacing: [f64; 3], max_value: f64, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = VoxelGrid::centered(dims, spacing).unwrap();
    for v in g.values.iter_mut() {
        *v = rng.gen_range(0.0..max_value);
    }
    g
}

/// Random rays whose endpoints sit on a sphere of the given radius
/// around the origin, so they pass near or through a centered grid.
pub fn random_rays(n: usize, radius: f64, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = |rng: &mut ChaCha8Rng| loop {
        let p: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if norm > 1e-3 {
            return [
                radius * p[0] / norm,
                radius * p[1] / norm,
                radius * p[2] / norm,
            ];
        }
    };
    (0..n)
        .map(|_| {
            // Aim from one sphere point toward the vicinity of the
            // center so most rays actually cross the grid.
            let source = point(&mut rng);
            let mut target = point(&mut rng);
            for t in target.iter_mut() {
                *t *= rng.gen_range(0.0..0.3);
            }
            let d = [
                target[0] - source[0],
                target[1] - source[1],
                target[2] - source[2],
            ];
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let pixel = [
                source[0] + 2.0 * radius * d[0] / norm,
                source[1] + 2.0 * radius * d[1] / norm,
                source[2] + 2.0 * radius * d[2] / norm,
            ];
            Ray { source, pixel }
        })
        .collect()
}

/// Low-frequency smooth grid: sum of a few 3D cosine modes mapped into
/// [0, max_value].
pub fn smooth_grid(dims: [usize; 3], spacing: [f64; 3], max_value: f64, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = VoxelGrid::centered(dims, spacing).unwrap();
    let e = g.extent();
    let r = 0.5 * e[0].min(e[1]).min(e[2]);
    let modes: Vec<([f64; 3], f64)> = (0..5)
        .map(|_| {
            (
                [
                    rng.gen_range(-1.5..1.5) / r,
                    rng.gen_range(-1.5..1.5) / r,
                    rng.gen_range(-1.5..1.5) / r,
                ],
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let [nx, ny, nz] = g.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = [
                    g.origin[0] + (i as f64 + 0.5) * g.spacing[0],
                    g.origin[1] + (j as f64 + 0.5) * g.spacing[1],
                    g.origin[2] + (k as f64 + 0.5) * g.spacing[2],
                ];
                let s: f64 = modes
                    .iter()
                    .map(|(f, ph)| (f[0] * p[0] + f[1] * p[1] + f[2] * p[2] + ph).cos())
                    .sum();
                let idx = g.flat_index(i, j, k);
                g.values[idx] = max_value * (0.5 + 0.5 * s / 5.0);
            }
        }
    }
    g
}
