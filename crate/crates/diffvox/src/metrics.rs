//! Image fidelity metrics between scalar fields (2D images or 3D
//! volumes): MSE, PSNR, Pearson correlation, and SSIM.
//!
//! Argument order is reference first; PSNR takes its peak from the
//! reference and SSIM its dynamic range, so those two are not symmetric
//! under swapping.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DiffVoxError, Result};

/// SSIM window width along every axis.
pub const SSIM_WINDOW: usize = 7;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Mean squared difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DiffVoxError::InvalidArgument(format!(
            "shape mismatch: {} vs {} elements",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(DiffVoxError::InvalidArgument("empty fields".into()));
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// 10 log10(peak^2 / mse), in dB; +infinity when the fields are equal.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(DiffVoxError::InvalidArgument(format!("peak must be > 0, got {peak}")));
    }
    let e = mse(reference, test)?;
    if e == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (peak * peak / e).log10())
    }
}

/// Pearson correlation of the flattened fields.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(DiffVoxError::InvalidArgument(format!(
            "shape mismatch: {} vs {} elements",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let mean_a: f64 = a.iter().sum::<f64>() / n;
    let mean_b: f64 = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let da = x - mean_a;
        let db = y - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(DiffVoxError::UndefinedMetric(
            "Pearson correlation needs nonzero variance in both fields".into(),
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Valid-window moving sum of width `window` along `axis`. `shape[0]`
/// is the fastest-varying axis.
fn moving_sum_axis(data: &[f64], shape: &[usize], axis: usize, window: usize) -> (Vec<f64>, Vec<usize>) {
    let stride: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let out_len_axis = len - window + 1;
    let mut out_shape = shape.to_vec();
    out_shape[axis] = out_len_axis;

    let lines = data.len() / len;
    let mut out = vec![0.0; lines * out_len_axis];

    // Decompose each line id into (inner, outer) about the axis.
    let outer_stride: usize = stride * len;
    for line in 0..lines {
        let inner = line % stride.max(1);
        let outer = line / stride.max(1);
        let base = outer * outer_stride + inner;
        let out_base = outer * (stride * out_len_axis) + inner;
        let mut acc = 0.0;
        for i in 0..window {
            acc += data[base + i * stride];
        }
        out[out_base] = acc;
        for i in 1..out_len_axis {
            acc += data[base + (i + window - 1) * stride] - data[base + (i - 1) * stride];
            out[out_base + i * stride] = acc;
        }
    }
    (out, out_shape)
}

/// Valid-window box sum of width `window` along every axis.
fn box_sum(data: &[f64], shape: &[usize], window: usize) -> (Vec<f64>, Vec<usize>) {
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for axis in 0..shape.len() {
        let (next, next_shape) = moving_sum_axis(&cur, &cur_shape, axis, window);
        cur = next;
        cur_shape = next_shape;
    }
    (cur, cur_shape)
}

/// Mean local SSIM with a 7-wide uniform window per axis, stride 1,
/// valid-window cropping at the borders. Works for any dimensionality
/// (square windows on images, cubic on volumes); `shape[0]` is the
/// fastest-varying axis.
pub fn ssim(reference: &[f64], test: &[f64], shape: &[usize], dynamic_range: f64) -> Result<f64> {
    let n: usize = shape.iter().product();
    if n != reference.len() || n != test.len() {
        return Err(DiffVoxError::InvalidArgument(format!(
            "shape {:?} does not match field lengths {} / {}",
            shape,
            reference.len(),
            test.len()
        )));
    }
    if shape.iter().any(|&d| d < SSIM_WINDOW) {
        return Err(DiffVoxError::InvalidArgument(format!(
            "every dim must be at least the SSIM window {SSIM_WINDOW}, got {shape:?}"
        )));
    }
    if !(dynamic_range > 0.0) {
        return Err(DiffVoxError::InvalidArgument(format!(
            "dynamic_range must be > 0, got {dynamic_range}"
        )));
    }

    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let win_n = (SSIM_WINDOW as f64).powi(shape.len() as i32);

    let aa: Vec<f64> = reference.iter().map(|&x| x * x).collect();
    let bb: Vec<f64> = test.iter().map(|&x| x * x).collect();
    let ab: Vec<f64> = reference.iter().zip(test).map(|(&x, &y)| x * y).collect();

    let (sa, out_shape) = box_sum(reference, shape, SSIM_WINDOW);
    let (sb, _) = box_sum(test, shape, SSIM_WINDOW);
    let (saa, _) = box_sum(&aa, shape, SSIM_WINDOW);
    let (sbb, _) = box_sum(&bb, shape, SSIM_WINDOW);
    let (sab, _) = box_sum(&ab, shape, SSIM_WINDOW);

    let windows: usize = out_shape.iter().product();
    let mut total = 0.0;
    for i in 0..windows {
        let mu_a = sa[i] / win_n;
        let mu_b = sb[i] / win_n;
        let var_a = saa[i] / win_n - mu_a * mu_a;
        let var_b = sbb[i] / win_n - mu_b * mu_b;
        let cov = sab[i] / win_n - mu_a * mu_b;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
    Ok(total / windows as f64)
}

fn serialize_psnr<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        s.serialize_f64(*value)
    } else {
        s.serialize_str("inf")
    }
}

fn deserialize_psnr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad psnr value '{t}'"))),
    }
}

/// All four fidelity scores for a reference/test pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ssim: f64,
    #[serde(serialize_with = "serialize_psnr", deserialize_with = "deserialize_psnr")]
    pub psnr: f64,
    pub mse: f64,
    pub pcc: f64,
}

/// Computes the full report. Peak and dynamic range are taken from the
/// reference (max, and max - min) unless `dynamic_range` overrides the
/// latter.
pub fn report(
    reference: &[f64],
    test: &[f64],
    shape: &[usize],
    dynamic_range: Option<f64>,
) -> Result<MetricReport> {
    let max = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = reference.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = dynamic_range.unwrap_or(max - min);
    Ok(MetricReport {
        ssim: ssim(reference, test, shape, range)?,
        psnr: psnr(reference, test, max)?,
        mse: mse(reference, test)?,
        pcc: pcc(reference, test)?,
    })
}
