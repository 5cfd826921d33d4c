//! Voxelgrid reconstruction by minibatch gradient descent.
//!
//! The objective is an L1 photometric loss between rendered and
//! measured negative-log intensities plus a weighted total-variation
//! term, minimized with Adam over Softplus-reparameterized voxels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DiffVoxError, Result};
use crate::geometry::{Ray, ScanGeometry};
use crate::grid::VoxelGrid;
use crate::renderer::RendererKind;

/// Measured projection data: per-view negative-log intensity images
/// with the geometry that produced them. Pixels are stored flat in
/// view-major, row-major order (matching `ScanGeometry::enumerate_rays`).
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub geometry: ScanGeometry,
    pub images: Vec<f64>,
}

impl ProjectionSet {
    pub fn new(geometry: ScanGeometry, images: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if images.len() != geometry.n_rays() {
            return Err(DiffVoxError::InvalidArgument(format!(
                "{} pixels but geometry defines {} rays",
                images.len(),
                geometry.n_rays()
            )));
        }
        if images.iter().any(|v| !v.is_finite()) {
            return Err(DiffVoxError::InvalidArgument(
                "projection images contain non-finite pixels".into(),
            ));
        }
        Ok(ProjectionSet { geometry, images })
    }
}

/// Reconstruction hyperparameters.
///
/// Defaults follow `default_for`: lr 0.03 decaying linearly to 0 over
/// 50 epochs, Softplus beta 20, 500 samples per ray for the trilinear
/// renderer, and lambda_tv 5 (Siddon) or 3 (trilinear). The defaults
/// are tuned for desk-scale volumes (around 64^3 voxels); larger
/// problems generally tolerate a larger learning rate and heavier TV
/// weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub renderer: RendererKind,
    pub lambda_tv: f64,
    pub iterations: usize,
    pub lr_initial: f64,
    pub batch_rays: usize,
    pub m_samples: usize,
    pub softplus_beta: f64,
    pub seed: u64,
}

impl ReconConfig {
    pub fn default_for(renderer: RendererKind) -> Self {
        ReconConfig {
            renderer,
            lambda_tv: match renderer {
                RendererKind::Siddon => 5.0,
                RendererKind::Trilinear => 3.0,
            },
            iterations: 50,
            lr_initial: 0.03,
            batch_rays: 1 << 16,
            m_samples: 500,
            softplus_beta: 20.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_tv >= 0.0) {
            return Err(DiffVoxError::InvalidArgument("lambda_tv must be >= 0".into()));
        }
        if !(self.lr_initial > 0.0) {
            return Err(DiffVoxError::InvalidArgument("lr_initial must be > 0".into()));
        }
        if self.batch_rays < 1 {
            return Err(DiffVoxError::InvalidArgument("batch_rays must be >= 1".into()));
        }
        if self.iterations < 1 {
            return Err(DiffVoxError::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.m_samples < 2 {
            return Err(DiffVoxError::InvalidArgument("m_samples must be >= 2".into()));
        }
        if !(self.softplus_beta > 0.0) {
            return Err(DiffVoxError::InvalidArgument("softplus_beta must be > 0".into()));
        }
        Ok(())
    }
}

/// Overflow-safe scalar Softplus (1/beta) * ln(1 + exp(beta * x)).
#[inline]
pub fn softplus_scalar(x: f64, beta: f64) -> f64 {
    let bx = beta * x;
    if bx > 30.0 {
        x
    } else {
        // Clamp so extreme negative inputs cannot underflow to 0.
        (bx.exp().ln_1p() / beta).max(f64::MIN_POSITIVE)
    }
}

/// Derivative of the Softplus: the logistic sigmoid of beta * x.
#[inline]
pub fn softplus_derivative(x: f64, beta: f64) -> f64 {
    let bx = beta * x;
    if bx > 30.0 {
        1.0
    } else if bx < -30.0 {
        bx.exp()
    } else {
        1.0 / (1.0 + (-bx).exp())
    }
}

/// Elementwise Softplus of the raw parameters; output is strictly
/// positive.
pub fn softplus(theta: &[f64], beta: f64) -> Vec<f64> {
    theta.iter().map(|&t| softplus_scalar(t, beta)).collect()
}

/// Anisotropic total variation: mean absolute forward difference over
/// all neighbor pairs along the three axes, with its exact subgradient
/// (sign(0) taken as 0).
pub fn tv_norm(grid: &VoxelGrid) -> Result<(f64, VoxelGrid)> {
    let [nx, ny, nz] = grid.dims;
    let n_terms = (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1);
    if n_terms == 0 {
        return Err(DiffVoxError::InvalidArgument(
            "TV needs at least one axis with dim >= 2".into(),
        ));
    }
    let inv_n = 1.0 / n_terms as f64;
    let mut value = 0.0;
    let mut grad = grid.zeros_like();
    let strides = [1, nx, nx * ny];
    for (axis, &stride) in strides.iter().enumerate() {
        let lims = [
            if axis == 0 { nx - 1 } else { nx },
            if axis == 1 { ny - 1 } else { ny },
            if axis == 2 { nz - 1 } else { nz },
        ];
        for k in 0..lims[2] {
            for j in 0..lims[1] {
                for i in 0..lims[0] {
                    let cur = grid.flat_index(i, j, k);
                    let next = cur + stride;
                    let diff = grid.values[next] - grid.values[cur];
                    value += diff.abs();
                    let s = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    grad.values[next] += s * inv_n;
                    grad.values[cur] -= s * inv_n;
                }
            }
        }
    }
    Ok((value * inv_n, grad))
}

/// Mean L1 distance between predicted and target intensities, with its
/// subgradient wrt the predictions (sign(0) taken as 0).
pub fn photometric_loss(predicted: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predicted.len() != target.len() {
        return Err(DiffVoxError::InvalidArgument(format!(
            "predicted length {} != target length {}",
            predicted.len(),
            target.len()
        )));
    }
    let n = predicted.len() as f64;
    let mut value = 0.0;
    let grad = predicted
        .iter()
        .zip(target.iter())
        .map(|(&p, &t)| {
            let d = p - t;
            value += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((value / n, grad))
}

/// One epoch of ray index batches: a uniform random permutation of
/// 0..total_rays chunked into `batch_rays`-sized batches (final batch
/// possibly smaller). Advancing the rng between calls refreshes the
/// permutation.
pub fn sample_batches(total_rays: usize, batch_rays: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    assert!(batch_rays >= 1, "batch_rays must be >= 1");
    let mut perm: Vec<usize> = (0..total_rays).collect();
    perm.shuffle(rng);
    perm.chunks(batch_rays).map(|c| c.to_vec()).collect()
}

/// Seeded single-epoch convenience wrapper around `sample_batches`.
pub fn sample_batches_seeded(total_rays: usize, batch_rays: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_batches(total_rays, batch_rays, &mut rng)
}

/// Linearly decaying learning rate: lr_initial * (1 - step/total).
pub fn lr_at(step: usize, total_steps: usize, lr_initial: f64) -> Result<f64> {
    if step >= total_steps {
        return Err(DiffVoxError::InvalidArgument(format!(
            "step {step} out of range (total {total_steps})"
        )));
    }
    Ok(lr_initial * (1.0 - step as f64 / total_steps as f64))
}

/// Optimizer state for the reconstruction loop.
#[derive(Debug, Clone)]
pub struct ReconState {
    pub theta: VoxelGrid,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step: usize,
}

impl ReconState {
    pub fn new(template: &VoxelGrid) -> Self {
        ReconState {
            theta: template.zeros_like(),
            adam_m: vec![0.0; template.len()],
            adam_v: vec![0.0; template.len()],
            step: 0,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Standard bias-corrected Adam update of `state.theta` in place.
pub fn adam_step(state: &mut ReconState, grad: &VoxelGrid, lr: f64) -> Result<()> {
    if !state.theta.same_layout(grad) {
        return Err(DiffVoxError::InvalidArgument(
            "gradient layout does not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..state.theta.values.len() {
        let g = grad.values[i];
        state.adam_m[i] = ADAM_BETA1 * state.adam_m[i] + (1.0 - ADAM_BETA1) * g;
        state.adam_v[i] = ADAM_BETA2 * state.adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.adam_m[i] / bc1;
        let v_hat = state.adam_v[i] / bc2;
        state.theta.values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
    Ok(())
}

/// One (epoch, batch, loss) progress report per optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

/// Full objective value and its gradient wrt the raw parameters, for a
/// fixed set of rays and targets: L1 photometric term through the
/// configured renderer plus lambda_tv times the TV of softplus(theta).
pub fn objective_and_gradient(
    theta: &VoxelGrid,
    rays: &[Ray],
    targets: &[f64],
    config: &ReconConfig,
) -> Result<(f64, VoxelGrid)> {
    let mut mu = theta.zeros_like();
    mu.values = softplus(&theta.values, config.softplus_beta);

    let predicted = config.renderer.forward(&mu, rays, config.m_samples)?;
    let (photo_value, photo_grad) = photometric_loss(&predicted.intensities, targets)?;
    let mut grad_mu = config
        .renderer
        .adjoint(theta, rays, config.m_samples, &photo_grad)?;

    let mut value = photo_value;
    if config.lambda_tv > 0.0 {
        let (tv_value, tv_grad) = tv_norm(&mu)?;
        value += config.lambda_tv * tv_value;
        for (g, t) in grad_mu.values.iter_mut().zip(tv_grad.values.iter()) {
            *g += config.lambda_tv * t;
        }
    }
    // Chain through the Softplus reparameterization.
    for (g, &t) in grad_mu.values.iter_mut().zip(theta.values.iter()) {
        *g *= softplus_derivative(t, config.softplus_beta);
    }
    Ok((value, grad_mu))
}

/// Reconstructs a volume of LACs from projection data.
///
/// Raw parameters start at zero; each epoch draws a fresh without-
/// replacement permutation of all rays, renders each batch, and applies
/// one Adam step per batch at the epoch's learning rate. Returns
/// softplus(theta), which is strictly positive.
pub fn reconstruct(
    projections: &ProjectionSet,
    template: &VoxelGrid,
    config: &ReconConfig,
    mut progress_sink: impl FnMut(Progress),
) -> Result<VoxelGrid> {
    config.validate()?;
    if projections.images.is_empty() {
        return Err(DiffVoxError::InvalidArgument("empty projection set".into()));
    }

    let geometry = &projections.geometry;
    let rays: Vec<Ray> = geometry.enumerate_rays().map(|(_, _, _, r)| r).collect();
    let total_rays = rays.len();

    let mut state = ReconState::new(template);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for epoch in 0..config.iterations {
        let lr = lr_at(epoch, config.iterations, config.lr_initial)?;
        let batches = sample_batches(total_rays, config.batch_rays, &mut rng);
        for (batch_id, batch) in batches.iter().enumerate() {
            let batch_rays: Vec<Ray> = batch.iter().map(|&i| rays[i]).collect();
            let batch_targets: Vec<f64> = batch.iter().map(|&i| projections.images[i]).collect();
            let (loss, grad) =
                objective_and_gradient(&state.theta, &batch_rays, &batch_targets, config)?;
            if !loss.is_finite() {
                return Err(DiffVoxError::Divergence { quantity: "loss", epoch, batch: batch_id });
            }
            if grad.values.iter().any(|g| !g.is_finite()) {
                return Err(DiffVoxError::Divergence {
                    quantity: "gradient",
                    epoch,
                    batch: batch_id,
                });
            }
            adam_step(&mut state, &grad, lr)?;
            progress_sink(Progress { epoch, batch: batch_id, loss });
        }
    }

    let mut result = template.zeros_like();
    result.values = softplus(&state.theta.values, config.softplus_beta);
    Ok(result)
}
