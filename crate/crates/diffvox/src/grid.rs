//! 3D scalar field on a regular grid with physical spacing and origin.

use crate::error::{DiffVoxError, Result};

/// A voxelgrid of scalars (linear attenuation coefficients in mm^-1, or
/// raw pre-activation parameters during optimization).
///
/// `origin` is the position of the corner of voxel (0,0,0); the center
/// of voxel (i,j,k) is at origin + (i+0.5, j+0.5, k+0.5) * spacing.
/// Voxel (i,j,k) maps to flat index i + nx*(j + ny*k).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d < 1) {
            return Err(DiffVoxError::InvalidArgument(
                "grid dims must be at least 1 in every axis".into(),
            ));
        }
        if spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(DiffVoxError::InvalidArgument(
                "grid spacing must be positive".into(),
            ));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(DiffVoxError::InvalidArgument(format!(
                "values length {} does not match dims {}x{}x{}",
                values.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        Ok(VoxelGrid { dims, spacing, origin, values })
    }

    /// All-zero grid with the given layout.
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, origin, vec![0.0; n])
    }

    /// Zero grid with the same dims/spacing/origin as `self`.
    pub fn zeros_like(&self) -> Self {
        VoxelGrid {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            values: vec![0.0; self.values.len()],
        }
    }

    /// Grid centered on the world origin with the given dims/spacing.
    pub fn centered(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let origin = [
            -0.5 * dims[0] as f64 * spacing[0],
            -0.5 * dims[1] as f64 * spacing[1],
            -0.5 * dims[2] as f64 * spacing[2],
        ];
        Self::zeros(dims, spacing, origin)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.flat_index(i, j, k)]
    }

    /// Physical extent of the bounding box along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    /// Corner opposite to origin.
    pub fn max_corner(&self) -> [f64; 3] {
        let e = self.extent();
        [self.origin[0] + e[0], self.origin[1] + e[1], self.origin[2] + e[2]]
    }

    /// True when shapes (dims, spacing, origin) agree.
    pub fn same_layout(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_validates() {
        assert!(VoxelGrid::new([2, 2, 2], [1.0, 1.0, 1.0], [0.0; 3], vec![0.0; 8]).is_ok());
        assert!(VoxelGrid::new([2, 2, 2], [1.0, 1.0, 1.0], [0.0; 3], vec![0.0; 7]).is_err());
        assert!(VoxelGrid::new([0, 2, 2], [1.0, 1.0, 1.0], [0.0; 3], vec![]).is_err());
        assert!(VoxelGrid::new([1, 1, 1], [0.0, 1.0, 1.0], [0.0; 3], vec![0.0]).is_err());
    }

    #[test]
    fn flat_index_is_x_fastest() {
        let g = VoxelGrid::zeros([3, 4, 5], [1.0; 3], [0.0; 3]).unwrap();
        assert_eq!(g.flat_index(0, 0, 0), 0);
        assert_eq!(g.flat_index(1, 0, 0), 1);
        assert_eq!(g.flat_index(0, 1, 0), 3);
        assert_eq!(g.flat_index(0, 0, 1), 12);
        assert_eq!(g.flat_index(2, 3, 4), 2 + 3 * (3 + 4 * 4));
    }

    #[test]
    fn centered_extent() {
        let g = VoxelGrid::centered([4, 4, 4], [0.5; 3]).unwrap();
        assert_eq!(g.origin, [-1.0, -1.0, -1.0]);
        assert_eq!(g.max_corner(), [1.0, 1.0, 1.0]);
    }
}
