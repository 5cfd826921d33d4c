//! Synthetic ground-truth volumes for desk-scale experiments.
//!
//! LAC magnitudes sit in a soft-tissue-like range (0 to 0.1 mm^-1) so
//! total ray attenuations land around 0.5 to 3 negative-log units.
//! The analytic phantoms (uniform, spheres, shells) have closed-form
//! line integrals in `analytic`, used as oracles for the projectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DiffVoxError, Result};
use crate::geometry::Ray;
use crate::grid::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Uniform,
    Spheres,
    Shells,
    SmoothNoise,
    ShellFilaments,
}

impl std::str::FromStr for PhantomKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(PhantomKind::Uniform),
            "spheres" => Ok(PhantomKind::Spheres),
            "shells" => Ok(PhantomKind::Shells),
            "smooth_noise" => Ok(PhantomKind::SmoothNoise),
            "shell_filaments" => Ok(PhantomKind::ShellFilaments),
            other => Err(format!(
                "unknown phantom kind '{other}' (expected uniform, spheres, shells, smooth_noise, or shell_filaments)"
            )),
        }
    }
}

pub const UNIFORM_LAC: f64 = 0.05;

/// A ball of constant LAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub lac: f64,
}

/// The two disjoint balls of the `spheres` phantom, for a grid with the
/// given bounding box half-extent (min over axes).
pub fn spheres_description(half_extent: f64) -> Vec<Sphere> {
    let r = half_extent;
    vec![
        Sphere { center: [-0.3 * r, -0.2 * r, 0.15 * r], radius: 0.45 * r, lac: 0.04 },
        Sphere { center: [0.35 * r, 0.25 * r, -0.2 * r], radius: 0.3 * r, lac: 0.08 },
    ]
}

/// The nested-ball decomposition of the `shells` phantom: at a point
/// with radius rho, the LAC is that of the smallest ball containing it
/// (balls listed innermost first), 0 outside all of them.
pub fn shells_description(half_extent: f64) -> Vec<Sphere> {
    let r = half_extent;
    let center = [0.0; 3];
    vec![
        Sphere { center, radius: 0.25 * r, lac: 0.08 },
        Sphere { center, radius: 0.50 * r, lac: 0.02 },
        Sphere { center, radius: 0.75 * r, lac: 0.06 },
        Sphere { center, radius: 0.92 * r, lac: 0.01 },
    ]
}

fn half_extent(grid: &VoxelGrid) -> f64 {
    let e = grid.extent();
    0.5 * e[0].min(e[1]).min(e[2])
}

fn voxel_center(grid: &VoxelGrid, i: usize, j: usize, k: usize) -> [f64; 3] {
    [
        grid.origin[0] + (i as f64 + 0.5) * grid.spacing[0],
        grid.origin[1] + (j as f64 + 0.5) * grid.spacing[1],
        grid.origin[2] + (k as f64 + 0.5) * grid.spacing[2],
    ]
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn fill_by_point(grid: &mut VoxelGrid, f: impl Fn([f64; 3]) -> f64) {
    let [nx, ny, nz] = grid.dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let idx = grid.flat_index(i, j, k);
                grid.values[idx] = f(voxel_center(grid, i, j, k));
            }
        }
    }
}

/// Deterministic synthetic volume, centered on the world origin.
/// The seed only influences the randomized kinds (smooth_noise,
/// shell_filaments).
pub fn make_phantom(kind: PhantomKind, dims: [usize; 3], spacing: [f64; 3], seed: u64) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::centered(dims, spacing)?;
    let r = half_extent(&grid);
    match kind {
        PhantomKind::Uniform => grid.values.fill(UNIFORM_LAC),
        PhantomKind::Spheres => {
            let spheres = spheres_description(r);
            fill_by_point(&mut grid, |p| {
                spheres
                    .iter()
                    .find(|s| dist(p, s.center) < s.radius)
                    .map_or(0.0, |s| s.lac)
            });
        }
        PhantomKind::Shells => {
            let balls = shells_description(r);
            fill_by_point(&mut grid, |p| {
                let rho = dist(p, [0.0; 3]);
                balls.iter().find(|s| rho < s.radius).map_or(0.0, |s| s.lac)
            });
        }
        PhantomKind::SmoothNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // A handful of low-frequency cosine modes.
            let modes: Vec<([f64; 3], f64)> = (0..8)
                .map(|_| {
                    let freq = [
                        rng.gen_range(-3.0..3.0) / r,
                        rng.gen_range(-3.0..3.0) / r,
                        rng.gen_range(-3.0..3.0) / r,
                    ];
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    (freq, phase)
                })
                .collect();
            fill_by_point(&mut grid, |p| {
                let s: f64 = modes
                    .iter()
                    .map(|(f, phase)| (f[0] * p[0] + f[1] * p[1] + f[2] * p[2] + phase).cos())
                    .sum();
                // Map sum of 8 cosines into [0, 0.1].
                (0.05 + 0.05 * s / 8.0).clamp(0.0, 0.1)
            });
        }
        PhantomKind::ShellFilaments => {
            // Outer shell plus thin random curved filaments inside it.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let filament_radius = 1.5 * spacing[0].max(spacing[1]).max(spacing[2]);
            let mut beads: Vec<[f64; 3]> = Vec::new();
            for _ in 0..6 {
                let mut pos = [
                    rng.gen_range(-0.5 * r..0.5 * r),
                    rng.gen_range(-0.5 * r..0.5 * r),
                    rng.gen_range(-0.5 * r..0.5 * r),
                ];
                let mut dir: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let step = 0.6 * filament_radius;
                for _ in 0..80 {
                    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt().max(1e-9);
                    for a in 0..3 {
                        pos[a] += step * dir[a] / norm;
                        dir[a] += rng.gen_range(-0.3..0.3);
                    }
                    if dist(pos, [0.0; 3]) > 0.72 * r {
                        break;
                    }
                    beads.push(pos);
                }
            }
            fill_by_point(&mut grid, |p| {
                let rho = dist(p, [0.0; 3]);
                if (0.8 * r..0.92 * r).contains(&rho) {
                    0.06
                } else if beads.iter().any(|b| dist(p, *b) < filament_radius) {
                    0.08
                } else {
                    0.0
                }
            });
        }
    }
    Ok(grid)
}

/// Closed-form line integrals through the analytic phantoms.
pub mod analytic {
    use super::*;

    /// Chord length of the segment [s, p] through a ball.
    pub fn sphere_chord(ray: &Ray, center: [f64; 3], radius: f64) -> f64 {
        let d = ray.direction();
        let o = [
            ray.source[0] - center[0],
            ray.source[1] - center[1],
            ray.source[2] - center[2],
        ];
        let a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let b = 2.0 * (o[0] * d[0] + o[1] * d[1] + o[2] * d[2]);
        let c = o[0] * o[0] + o[1] * o[1] + o[2] * o[2] - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 || a == 0.0 {
            return 0.0;
        }
        let sq = disc.sqrt();
        let t0 = ((-b - sq) / (2.0 * a)).clamp(0.0, 1.0);
        let t1 = ((-b + sq) / (2.0 * a)).clamp(0.0, 1.0);
        (t1 - t0) * a.sqrt()
    }

    /// Chord length of the segment [s, p] through an axis-aligned box.
    pub fn box_chord(ray: &Ray, lo: [f64; 3], hi: [f64; 3]) -> f64 {
        let d = ray.direction();
        let mut entry = 0.0f64;
        let mut exit = 1.0f64;
        for a in 0..3 {
            if d[a].abs() < 1e-300 {
                if ray.source[a] < lo[a] || ray.source[a] > hi[a] {
                    return 0.0;
                }
            } else {
                let mut a0 = (lo[a] - ray.source[a]) / d[a];
                let mut a1 = (hi[a] - ray.source[a]) / d[a];
                if a0 > a1 {
                    std::mem::swap(&mut a0, &mut a1);
                }
                entry = entry.max(a0);
                exit = exit.min(a1);
            }
        }
        if entry < exit {
            (exit - entry) * ray.length()
        } else {
            0.0
        }
    }

    /// Exact line integral of an analytic phantom with the grid's
    /// bounding box and half-extent.
    pub fn line_integral(kind: PhantomKind, grid: &VoxelGrid, ray: &Ray) -> Result<f64> {
        let r = super::half_extent(grid);
        match kind {
            PhantomKind::Uniform => {
                Ok(UNIFORM_LAC * box_chord(ray, grid.origin, grid.max_corner()))
            }
            PhantomKind::Spheres => Ok(spheres_description(r)
                .iter()
                .map(|s| s.lac * sphere_chord(ray, s.center, s.radius))
                .sum()),
            PhantomKind::Shells => {
                // Nested balls: each ball contributes (its LAC minus the
                // LAC of the ball just outside it) times its chord.
                let balls = shells_description(r);
                let mut total = 0.0;
                for (i, b) in balls.iter().enumerate() {
                    let outer_lac = balls.get(i + 1).map_or(0.0, |o| o.lac);
                    total += (b.lac - outer_lac) * sphere_chord(ray, b.center, b.radius);
                }
                Ok(total)
            }
            _ => Err(DiffVoxError::InvalidArgument(
                "no closed-form integral for this phantom kind".into(),
            )),
        }
    }
}
