//! Cone-beam acquisition geometry: a circular source orbit about the
//! isocenter with a flat detector panel.
//!
//! World frame convention: the isocenter is the origin, the orbit lies
//! in the z=0 plane, axes are right-handed, and view angles are
//! measured counterclockwise from +x as seen from +z. Rays target
//! detector pixel centers.

use serde::{Deserialize, Serialize};

use crate::error::{DiffVoxError, Result};

/// A single X-ray beam from the source point to a detector pixel
/// center, both in world millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub source: [f64; 3],
    pub pixel: [f64; 3],
}

impl Ray {
    /// Euclidean distance from source to pixel.
    pub fn length(&self) -> f64 {
        let d = self.direction();
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Unnormalized direction pixel - source.
    pub fn direction(&self) -> [f64; 3] {
        [
            self.pixel[0] - self.source[0],
            self.pixel[1] - self.source[1],
            self.pixel[2] - self.source[2],
        ]
    }

    /// Point source + alpha * (pixel - source).
    pub fn at(&self, alpha: f64) -> [f64; 3] {
        let d = self.direction();
        [
            self.source[0] + alpha * d[0],
            self.source[1] + alpha * d[1],
            self.source[2] + alpha * d[2],
        ]
    }
}

/// Circular-orbit cone-beam scan geometry with a flat detector.
///
/// All lengths are millimeters, all angles radians. Serializes to JSON
/// with exactly these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGeometry {
    pub source_to_isocenter: f64,
    pub source_to_detector: f64,
    pub detector_rows: usize,
    pub detector_cols: usize,
    pub pixel_pitch_u: f64,
    pub pixel_pitch_v: f64,
    pub view_angles: Vec<f64>,
    #[serde(default)]
    pub detector_vertical_offset: f64,
}

impl ScanGeometry {
    /// Validates the geometry invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.source_to_detector > self.source_to_isocenter && self.source_to_isocenter > 0.0) {
            return Err(DiffVoxError::InvalidArgument(format!(
                "require source_to_detector > source_to_isocenter > 0, got {} and {}",
                self.source_to_detector, self.source_to_isocenter
            )));
        }
        if self.detector_rows < 1 || self.detector_cols < 1 {
            return Err(DiffVoxError::InvalidArgument(
                "detector raster must be at least 1x1".into(),
            ));
        }
        if !(self.pixel_pitch_u > 0.0 && self.pixel_pitch_v > 0.0) {
            return Err(DiffVoxError::InvalidArgument(
                "pixel pitches must be positive".into(),
            ));
        }
        if self.view_angles.iter().any(|a| !a.is_finite()) {
            return Err(DiffVoxError::InvalidArgument(
                "view angles must be finite".into(),
            ));
        }
        if !self.detector_vertical_offset.is_finite() {
            return Err(DiffVoxError::InvalidArgument(
                "detector_vertical_offset must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn n_views(&self) -> usize {
        self.view_angles.len()
    }

    /// Total number of rays across all views.
    pub fn n_rays(&self) -> usize {
        self.n_views() * self.detector_rows * self.detector_cols
    }

    /// Builds a middle-orbit geometry with `n_views` uniformly spaced
    /// angles 2*pi*k/n_views, k = 0..n_views-1.
    pub fn circular_orbit(
        n_views: usize,
        source_to_isocenter: f64,
        source_to_detector: f64,
        detector_rows: usize,
        detector_cols: usize,
        pixel_pitch_u: f64,
        pixel_pitch_v: f64,
    ) -> Result<Self> {
        if n_views == 0 {
            return Err(DiffVoxError::InvalidArgument(
                "n_views must be at least 1".into(),
            ));
        }
        let step = 2.0 * std::f64::consts::PI / n_views as f64;
        let geom = ScanGeometry {
            source_to_isocenter,
            source_to_detector,
            detector_rows,
            detector_cols,
            pixel_pitch_u,
            pixel_pitch_v,
            view_angles: (0..n_views).map(|k| k as f64 * step).collect(),
            detector_vertical_offset: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// The ray for one detector pixel of one view.
    ///
    /// The source sits on the orbit circle at the view angle; the flat
    /// detector is centered on the source->isocenter axis at distance
    /// `source_to_detector`, with u tangent to the orbit and v along +z
    /// (shifted by `detector_vertical_offset`).
    pub fn ray_for_pixel(&self, view_index: usize, row: usize, col: usize) -> Result<Ray> {
        if view_index >= self.n_views() {
            return Err(DiffVoxError::InvalidArgument(format!(
                "view index {} out of range ({} views)",
                view_index,
                self.n_views()
            )));
        }
        if row >= self.detector_rows || col >= self.detector_cols {
            return Err(DiffVoxError::InvalidArgument(format!(
                "pixel ({}, {}) out of range ({}x{} detector)",
                row, col, self.detector_rows, self.detector_cols
            )));
        }
        Ok(self.ray_for_pixel_unchecked(view_index, row, col))
    }

    #[inline]
    fn ray_for_pixel_unchecked(&self, view_index: usize, row: usize, col: usize) -> Ray {
        let theta = self.view_angles[view_index];
        let (sin_t, cos_t) = theta.sin_cos();
        let source = [
            self.source_to_isocenter * cos_t,
            self.source_to_isocenter * sin_t,
            0.0,
        ];
        // Unit source->isocenter axis and detector in-plane axes.
        let axis = [-cos_t, -sin_t, 0.0];
        let u_axis = [-sin_t, cos_t, 0.0];
        // v axis is +z.
        let u = (col as f64 - (self.detector_cols as f64 - 1.0) / 2.0) * self.pixel_pitch_u;
        let v = (row as f64 - (self.detector_rows as f64 - 1.0) / 2.0) * self.pixel_pitch_v
            + self.detector_vertical_offset;
        let pixel = [
            source[0] + self.source_to_detector * axis[0] + u * u_axis[0],
            source[1] + self.source_to_detector * axis[1] + u * u_axis[1],
            source[2] + v,
        ];
        Ray { source, pixel }
    }

    /// All rays of the scan in deterministic view-major, then row-major
    /// order: (view, row, col, ray).
    pub fn enumerate_rays(&self) -> impl Iterator<Item = (usize, usize, usize, Ray)> + '_ {
        (0..self.n_views()).flat_map(move |view| {
            (0..self.detector_rows).flat_map(move |row| {
                (0..self.detector_cols)
                    .map(move |col| (view, row, col, self.ray_for_pixel_unchecked(view, row, col)))
            })
        })
    }

    /// Flat ray index in enumerate_rays order.
    pub fn ray_index(&self, view: usize, row: usize, col: usize) -> usize {
        (view * self.detector_rows + row) * self.detector_cols + col
    }

    /// Ray for a flat index in enumerate_rays order.
    pub fn ray_at(&self, index: usize) -> Ray {
        let per_view = self.detector_rows * self.detector_cols;
        let view = index / per_view;
        let rem = index % per_view;
        self.ray_for_pixel_unchecked(view, rem / self.detector_cols, rem % self.detector_cols)
    }
}
