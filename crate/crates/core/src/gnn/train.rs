use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::{backward_prepared, PreparedView};
use super::model::{MissingnessModel, Params};
use crate::corrupt::{build_training_epoch, CorruptionConfig};
use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::sampler::{SamplerConfig, SubgraphView};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "training.learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("training.beta1 and training.beta2 must lie in [0, 1)".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("training.epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("training.batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    pub fn new(model: &MissingnessModel, cfg: &TrainConfig) -> Self {
        Adam {
            m: Params::zeros(&model.config),
            v: Params::zeros(&model.config),
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut Params, grad: &Params) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.lr;
        let eps = self.epsilon;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(grad.tensors());
        for (((p, m), v), g) in tensors {
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean BCE over each epoch's views.
    pub loss_curve: Vec<f64>,
    pub views_per_epoch: Vec<usize>,
}

/// Sum of per-view losses and gradients, reduced in view order.
pub fn batch_gradient(model: &MissingnessModel, batch: &[(PreparedView, f64)]) -> Result<(Vec<f64>, Params)> {
    let parts: Vec<Result<(f64, Params)>> = batch
        .par_iter()
        .map(|(view, y)| backward_prepared(model, view, *y))
        .collect();
    let mut losses = Vec::with_capacity(parts.len());
    let mut total = Params::zeros(&model.config);
    for part in parts {
        let (loss, grad) = part?;
        losses.push(loss);
        total.add_assign(&grad);
    }
    Ok((losses, total))
}

fn prepare(g: &GraphIndex, views: &[SubgraphView], input_dim: usize) -> Result<Vec<(PreparedView, f64)>> {
    views
        .par_iter()
        .filter_map(|v| v.label.target().map(|y| (v, y)))
        .map(|(v, y)| Ok((PreparedView::new(g, v, input_dim)?, y)))
        .collect()
}

/// Trains on a caller-supplied stream of epochs. `next_epoch(i, rng)` builds
/// the views of epoch `i`.
pub fn train_with<F>(
    model: &mut MissingnessModel,
    g: &GraphIndex,
    cfg: &TrainConfig,
    mut next_epoch: F,
) -> Result<TrainReport>
where
    F: FnMut(usize, &mut ChaCha8Rng) -> Result<Vec<SubgraphView>>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model, cfg);
    let mut report = TrainReport {
        loss_curve: Vec::with_capacity(cfg.epochs),
        views_per_epoch: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let views = next_epoch(epoch, &mut rng)?;
        let mut data = prepare(g, &views, model.config.input_dim)?;
        if data.is_empty() {
            return Err(Error::EmptyEpoch(format!("epoch {epoch} has no labelled views")));
        }
        data.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, batch) in data.chunks(cfg.batch_size).enumerate() {
            let (losses, mut grad) = batch_gradient(model, batch)?;
            let batch_loss: f64 = losses.iter().sum();
            if !batch_loss.is_finite() || !grad.all_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    detail: format!("batch loss {batch_loss}, {} views", batch.len()),
                });
            }
            loss_sum += batch_loss;
            grad.scale(1.0 / batch.len() as f64);
            adam.step(&mut model.params, &grad);
        }
        let mean = loss_sum / data.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.5} over {} views", data.len());
        report.loss_curve.push(mean);
        report.views_per_epoch.push(data.len());
    }
    Ok(report)
}

/// Trains with a fresh corrupted/intact epoch resampled from `g` every epoch.
pub fn train(
    model: &mut MissingnessModel,
    g: &GraphIndex,
    sampler: &SamplerConfig,
    corruption: &CorruptionConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    sampler.validate()?;
    corruption.validate()?;
    train_with(model, g, cfg, |_, rng| build_training_epoch(g, sampler, corruption, rng))
}
