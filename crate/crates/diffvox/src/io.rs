//! Bit-exact volume and projection serialization.
//!
//! Each dataset is a pair of files: a strict JSON header and a raw
//! little-endian payload. Volumes use `<base>.volhdr.json` +
//! `<base>.vol.raw`, projection sets `<base>.projhdr.json` +
//! `<base>.proj.raw`. Payload order is x-fastest for volumes and
//! view-major, then row-major for projections.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DiffVoxError, Result};
use crate::geometry::ScanGeometry;
use crate::grid::VoxelGrid;
use crate::optim::ProjectionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "f64")]
    F64,
}

impl Dtype {
    fn size(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

impl std::str::FromStr for Dtype {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(format!("unknown dtype '{other}' (expected f32 or f64)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum StorageOrder {
    #[serde(rename = "x-fastest")]
    XFastest,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
    dtype: Dtype,
    order: StorageOrder,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectionHeader {
    geometry: ScanGeometry,
    views: usize,
    rows: usize,
    cols: usize,
    dtype: Dtype,
}

pub fn volume_paths(base: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(base, ".volhdr.json"), with_suffix(base, ".vol.raw"))
}

pub fn projection_paths(base: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(base, ".projhdr.json"), with_suffix(base, ".proj.raw"))
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn encode_payload(values: &[f64], dtype: Dtype, what: &str) -> Result<Vec<u8>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DiffVoxError::NonFiniteData(what.to_string()));
    }
    let mut bytes = Vec::with_capacity(values.len() * dtype.size());
    match dtype {
        Dtype::F32 => {
            for &v in values {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(bytes)
}

fn decode_payload(bytes: &[u8], dtype: Dtype, expected: usize, what: &str) -> Result<Vec<f64>> {
    if bytes.len() != expected * dtype.size() {
        return Err(DiffVoxError::SizeMismatch(format!(
            "{what}: payload is {} bytes but header declares {} scalars of {} bytes",
            bytes.len(),
            expected,
            dtype.size()
        )));
    }
    Ok(match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

/// Writes `<base>.volhdr.json` and `<base>.vol.raw`.
pub fn write_volume(base: &Path, grid: &VoxelGrid, dtype: Dtype) -> Result<()> {
    let header = VolumeHeader {
        dims: grid.dims,
        spacing_mm: grid.spacing,
        origin_mm: grid.origin,
        dtype,
        order: StorageOrder::XFastest,
    };
    let payload = encode_payload(&grid.values, dtype, "volume")?;
    let (hdr_path, raw_path) = volume_paths(base);
    fs::write(hdr_path, serde_json::to_string_pretty(&header)?)?;
    fs::write(raw_path, payload)?;
    Ok(())
}

/// Reads a volume written by `write_volume`.
pub fn read_volume(base: &Path) -> Result<(VoxelGrid, Dtype)> {
    let (hdr_path, raw_path) = volume_paths(base);
    let header: VolumeHeader = serde_json::from_str(&fs::read_to_string(&hdr_path)?)
        .map_err(|e| DiffVoxError::MalformedHeader(format!("{}: {e}", hdr_path.display())))?;
    let bytes = fs::read(&raw_path)?;
    let n = header.dims[0] * header.dims[1] * header.dims[2];
    let values = decode_payload(&bytes, header.dtype, n, "volume")?;
    let grid = VoxelGrid::new(header.dims, header.spacing_mm, header.origin_mm, values)?;
    Ok((grid, header.dtype))
}

/// Writes `<base>.projhdr.json` and `<base>.proj.raw`.
pub fn write_projections(base: &Path, projections: &ProjectionSet, dtype: Dtype) -> Result<()> {
    let geom = &projections.geometry;
    let header = ProjectionHeader {
        geometry: geom.clone(),
        views: geom.n_views(),
        rows: geom.detector_rows,
        cols: geom.detector_cols,
        dtype,
    };
    let payload = encode_payload(&projections.images, dtype, "projections")?;
    let (hdr_path, raw_path) = projection_paths(base);
    fs::write(hdr_path, serde_json::to_string_pretty(&header)?)?;
    fs::write(raw_path, payload)?;
    Ok(())
}

/// Reads a projection set written by `write_projections`.
pub fn read_projections(base: &Path) -> Result<(ProjectionSet, Dtype)> {
    let (hdr_path, raw_path) = projection_paths(base);
    let header: ProjectionHeader = serde_json::from_str(&fs::read_to_string(&hdr_path)?)
        .map_err(|e| DiffVoxError::MalformedHeader(format!("{}: {e}", hdr_path.display())))?;
    if header.views != header.geometry.n_views()
        || header.rows != header.geometry.detector_rows
        || header.cols != header.geometry.detector_cols
    {
        return Err(DiffVoxError::MalformedHeader(
            "views/rows/cols disagree with the embedded geometry".into(),
        ));
    }
    let bytes = fs::read(&raw_path)?;
    let n = header.views * header.rows * header.cols;
    let images = decode_payload(&bytes, header.dtype, n, "projections")?;
    let set = ProjectionSet::new(header.geometry, images)?;
    Ok((set, header.dtype))
}
