//! The shared minibatch training loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layers::ForwardCtx;
use crate::loss::Loss;
use crate::optim::Optimizer;
use crate::{rng, NnError, Param, Result, Tensor};

/// A model the training loop can drive.
pub trait Trainable {
    fn forward_batch(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Vec<f64>>;
    /// Accumulate parameter gradients for `d loss / d prediction`.
    fn backward_batch(&mut self, dpred: &[f64]);
    fn parts(&mut self) -> (Vec<&mut Param>, &mut Optimizer);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    /// L2 penalty coefficient; adds `l2 · w` to every weight gradient.
    pub l2: f64,
    pub log_every: usize,
    /// Rescale the global gradient norm down to this value when exceeded.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 17, iterations: 10_000, l2: 0.01, log_every: 100, clip_norm: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub iteration: usize,
    pub loss: f64,
}

/// Run `cfg.iterations` minibatch steps. Each batch is drawn uniformly with
/// replacement. The data loss of the current batch is logged at iteration 1
/// and every `log_every` iterations.
pub fn fit<M: Trainable>(
    model: &mut M,
    loss: Loss,
    inputs: &Tensor,
    labels: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<LossPoint>> {
    let n = inputs.batch();
    if n != labels.len() {
        return Err(NnError::ShapeMismatch(format!("{n} inputs but {} labels", labels.len())));
    }
    if cfg.batch_size == 0 || cfg.log_every == 0 {
        return Err(NnError::InvalidConfig("batch_size and log_every must be positive".into()));
    }
    let mut batch_rng = rng::named(cfg.seed, "batch");
    let mut dropout_rng = rng::named(cfg.seed, "dropout");
    let mut trajectory = Vec::new();
    let mut idx = vec![0usize; cfg.batch_size];
    for it in 1..=cfg.iterations {
        for i in idx.iter_mut() {
            *i = batch_rng.random_range(0..n);
        }
        let x = inputs.gather(&idx);
        let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
        {
            let (mut params, _) = model.parts();
            params.iter_mut().for_each(|p| p.zero_grad());
        }
        let mut ctx = ForwardCtx { training: true, rng: &mut dropout_rng };
        let pred = model.forward_batch(&x, &mut ctx)?;
        let (value, dpred) = loss.evaluate(&pred, &y);
        if !value.is_finite() {
            return Err(NnError::NonFiniteLoss { iteration: it, loss: value });
        }
        model.backward_batch(&dpred);
        let (mut params, opt) = model.parts();
        if cfg.l2 != 0.0 {
            for p in params.iter_mut().filter(|p| p.decay) {
                let p: &mut Param = p;
                p.grad_mut();
                for (g, w) in p.grad.iter_mut().zip(p.value.data()) {
                    *g += cfg.l2 * w;
                }
            }
        }
        if let Some(max_norm) = cfg.clip_norm {
            clip_global_norm(&mut params, max_norm);
        }
        opt.step(&mut params);
        if it == 1 || it % cfg.log_every == 0 {
            trajectory.push(LossPoint { iteration: it, loss: value });
        }
    }
    Ok(trajectory)
}

/// Scale all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(params: &mut [&mut Param], max_norm: f64) -> f64 {
    let norm = params.iter().map(|p| p.grad.iter().map(|g| g * g).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
