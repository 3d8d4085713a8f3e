use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sample::field_to_tensor;
use super::schedule::{build_schedule, forward_noise, NoiseSchedule};
use super::unet::{denoiser_backward, denoiser_forward, denoiser_forward_cached, DenoiserParameters, UNetConfig};
use crate::masking::{make_jittered_line_cut_mask, MaskSpec};
use crate::numerics::{adam_step, mse, mse_backward, AdamState, Tensor};
use crate::{rng, Error, Field, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Draw jittered line-cut masks instead of the evenly spaced ones.
    pub resample_masks: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 3e-4,
            seed: 0,
            resample_masks: false,
        }
    }
}

/// Epoch 1, every fifth epoch, and the last epoch.
pub fn checkpoint_epochs(epochs: usize) -> Vec<usize> {
    (1..=epochs)
        .filter(|&e| e == 1 || e % 5 == 0 || e == epochs)
        .collect()
}

/// One training pair: clean image and its mask as a 0/1 plane.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub x0: Tensor<f32>,
    pub mask: Tensor<f32>,
}

impl TrainItem {
    fn measurement(&self) -> Tensor<f32> {
        let data = self
            .x0
            .data()
            .iter()
            .zip(self.mask.data())
            .map(|(&x, &m)| x * m)
            .collect();
        Tensor::from_vec(1, self.x0.height(), self.x0.width(), data).expect("same shape")
    }
}

fn gaussian_like(t: &Tensor<f32>, rng: &mut impl Rng) -> Tensor<f32> {
    let data = (0..t.data().len())
        .map(|_| rng.sample::<f32, _>(StandardNormal))
        .collect();
    Tensor::from_vec(t.channels(), t.height(), t.width(), data).expect("same shape")
}

/// One Adam update on the mean x0-prediction loss of `batch`.
pub fn training_step(
    params: &mut DenoiserParameters<f32>,
    adam: &mut AdamState<f32>,
    schedule: &NoiseSchedule,
    batch: &[TrainItem],
    rng: &mut impl Rng,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f32;
    let mut grads = vec![0.0f32; params.count()];
    let mut total = 0.0;
    for item in batch {
        let t = rng.random_range(0..schedule.steps());
        let eps = gaussian_like(&item.x0, rng);
        let x_t = forward_noise(&item.x0, t, &eps, schedule)?;
        let (pred, cache) = denoiser_forward_cached(params, &x_t, &item.measurement(), &item.mask, t)?;
        total += mse(&pred, &item.x0)?;
        let g = mse_backward(&pred, &item.x0)?.map(|v| v * scale);
        denoiser_backward(params, cache, &g, &mut grads)?;
    }
    let loss = total / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss {loss}")));
    }
    adam_step(params.values_mut(), &grads, adam)?;
    Ok(loss)
}

/// Loss trajectory of a training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean step loss per epoch.
    pub train_loss: Vec<f64>,
    /// `(epoch, loss)` at every checkpoint epoch.
    pub val_loss: Vec<(usize, f64)>,
}

/// Progress notifications from [`train`].
#[derive(Debug)]
pub enum TrainEvent<'a> {
    Epoch {
        epoch: usize,
        train_loss: f64,
        val_loss: Option<f64>,
    },
    Checkpoint {
        epoch: usize,
        params: &'a DenoiserParameters<f32>,
    },
}

struct MaskBank {
    specs: Vec<MaskSpec>,
    cache: HashMap<(usize, usize, usize), Tensor<f32>>,
}

impl MaskBank {
    fn new(specs: &[MaskSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("mask family is empty".into()));
        }
        Ok(Self {
            specs: specs.to_vec(),
            cache: HashMap::new(),
        })
    }

    fn draw(&mut self, h: usize, w: usize, jitter: bool, rng: &mut impl Rng) -> Result<Tensor<f32>> {
        let k = rng.random_range(0..self.specs.len());
        match self.specs[k] {
            MaskSpec::LineCut(spec) if jitter => {
                Ok(field_to_tensor(&make_jittered_line_cut_mask(h, w, spec, rng)?.to_field()))
            }
            spec => {
                if let Some(m) = self.cache.get(&(k, h, w)) {
                    return Ok(m.clone());
                }
                let m = field_to_tensor(&spec.build(h, w)?.to_field());
                self.cache.insert((k, h, w), m.clone());
                Ok(m)
            }
        }
    }
}

/// Mean validation loss with masks, steps and noise fixed per image.
/// Parameters are only read.
pub fn validation_loss(
    params: &DenoiserParameters<f32>,
    schedule: &NoiseSchedule,
    images: &[Field],
    masks: &[MaskSpec],
    seed: u64,
) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("no validation images".into()));
    }
    let mut bank = MaskBank::new(masks)?;
    let mut total = 0.0;
    for (i, img) in images.iter().enumerate() {
        let mut r = rng::indexed_stream(seed, rng::STREAM_VALIDATION, i as u64);
        let (h, w) = img.dim();
        let item = TrainItem {
            x0: field_to_tensor(img),
            mask: bank.draw(h, w, false, &mut r)?,
        };
        let t = r.random_range(0..schedule.steps());
        let eps = gaussian_like(&item.x0, &mut r);
        let x_t = forward_noise(&item.x0, t, &eps, schedule)?;
        let pred = denoiser_forward(params, &x_t, &item.measurement(), &item.mask, t)?;
        total += mse(&pred, &item.x0)?;
    }
    Ok(total / images.len() as f64)
}

/// Trains a fresh denoiser on `train_images`, drawing one mask per example
/// per epoch uniformly from `masks`.
pub fn train(
    model: UNetConfig,
    train_images: &[Field],
    val_images: &[Field],
    masks: &[MaskSpec],
    config: &TrainConfig,
    mut on_event: impl FnMut(TrainEvent<'_>) -> Result<()>,
) -> Result<(DenoiserParameters<f32>, TrainingHistory)> {
    if train_images.is_empty() || config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument(
            "training needs images, a positive batch size and at least one epoch".into(),
        ));
    }
    let schedule = build_schedule(model.steps)?;
    let mut params = DenoiserParameters::init(model, &mut rng::stream(config.seed, rng::STREAM_INIT))?;
    let mut adam = AdamState::new(params.count(), config.learning_rate);
    let images: Vec<Tensor<f32>> = train_images.iter().map(field_to_tensor).collect();
    let mut bank = MaskBank::new(masks)?;
    let mut shuffle_rng = rng::stream(config.seed, rng::STREAM_SHUFFLE);
    let mut mask_rng = rng::stream(config.seed, rng::STREAM_MASK);
    let mut noise_rng = rng::stream(config.seed, rng::STREAM_NOISE);
    let checkpoints = checkpoint_epochs(config.epochs);
    let mut history = TrainingHistory::default();
    let mut order: Vec<usize> = (0..images.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk
                .iter()
                .map(|&i| {
                    let x0 = images[i].clone();
                    let mask = bank.draw(x0.height(), x0.width(), config.resample_masks, &mut mask_rng)?;
                    Ok(TrainItem { x0, mask })
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = training_step(&mut params, &mut adam, &schedule, &batch, &mut noise_rng)
                .map_err(|e| match e {
                    Error::NonFinite(d) => Error::NonFinite(format!("epoch {epoch}: {d}")),
                    other => other,
                })?;
            weighted += loss * batch.len() as f64;
        }
        let train_loss = weighted / images.len() as f64;
        history.train_loss.push(train_loss);
        let mut val = None;
        if checkpoints.contains(&epoch) {
            if !val_images.is_empty() {
                let v = validation_loss(&params, &schedule, val_images, masks, config.seed)?;
                history.val_loss.push((epoch, v));
                val = Some(v);
            }
            on_event(TrainEvent::Checkpoint {
                epoch,
                params: &params,
            })?;
        }
        on_event(TrainEvent::Epoch {
            epoch,
            train_loss,
            val_loss: val,
        })?;
    }
    Ok((params, history))
}
