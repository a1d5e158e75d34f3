//! Cross-entropy loss, the mini-batch training loop, and model selection by
//! lowest validation loss.
//!
//! Determinism: everything stochastic is derived from `TrainConfig::seed`.
//! Per-sample work inside a batch (augmentation, forward, backward) runs in
//! parallel with derived RNG streams, and gradients are reduced in sample
//! order afterwards, so results are identical at any thread count.

use rayon::prelude::*;

use crate::adam::{adam_step, AdamConfig, AdamState};
use crate::augment::{augment, AugmentPolicy};
use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::dataset::{make_batches, DatasetSplit, Sample};
use crate::error::{Error, Result};
use crate::image_io::standardize;
use crate::layers::Mode;
use crate::model::{model_backward, model_forward, ModelParams, CLASS_COUNT};
use crate::rng::Pcg32;
use crate::tensor::{Scalar, Tensor};

const TRAIN_STREAM: u64 = 0x54_52_41_49; // "TRAI"
const INIT_TAG: u64 = 0;
const EPOCH_TAG_BASE: u64 = 1;

/// Probabilities below this are clamped before the log.
const LOG_FLOOR: f64 = 1e-12;

/// Hyperparameters of a full training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub augment: AugmentPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 11,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            augment: AugmentPolicy::standard(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        self.adam.validate()
    }
}

/// One-hot vector for a class label.
pub fn one_hot<F: Scalar>(label: usize, classes: usize) -> Result<Tensor<F>> {
    if label >= classes {
        return Err(Error::Input(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let mut t = Tensor::zeros(&[classes])?;
    t.data_mut()[label] = F::one();
    Ok(t)
}

/// Cross-entropy of one prediction against a one-hot target: the negative
/// natural log of the true-class probability (clamped at 1e-12).
pub fn cross_entropy<F: Scalar>(probs: &Tensor<F>, onehot: &Tensor<F>) -> Result<F> {
    if probs.shape() != onehot.shape() || probs.rank() != 1 {
        return Err(Error::Input(format!(
            "cross entropy shapes differ: {:?} vs {:?}",
            probs.shape(),
            onehot.shape()
        )));
    }
    let mut ones = 0usize;
    for &y in onehot.data() {
        if y == F::one() {
            ones += 1;
        } else if y != F::zero() {
            return Err(Error::Input("target is not a one-hot vector".into()));
        }
    }
    if ones != 1 {
        return Err(Error::Input(format!(
            "target must contain exactly one 1, found {ones}"
        )));
    }
    let floor = F::from_f64(LOG_FLOOR);
    let mut loss = F::zero();
    for (&p, &y) in probs.data().iter().zip(onehot.data()) {
        if y == F::one() {
            let p = if p > floor { p } else { floor };
            loss = -p.ln();
        }
    }
    Ok(loss)
}

/// Gradient of cross-entropy with respect to the logits that produced
/// `probs` through softmax: simply `probs - onehot`.
pub fn cross_entropy_grad_logits<F: Scalar>(probs: &Tensor<F>, onehot: &Tensor<F>) -> Tensor<F> {
    let data = probs
        .data()
        .iter()
        .zip(onehot.data())
        .map(|(&p, &y)| p - y)
        .collect();
    Tensor::from_vec(probs.shape(), data).expect("same shape")
}

/// Mean loss / accuracy / MAE over a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
    pub mae: f64,
}

fn argmax(probs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn sample_metrics(probs: &[f32; CLASS_COUNT], label: usize) -> (f64, bool, f64) {
    let p_true = (probs[label] as f64).max(LOG_FLOOR);
    let loss = -p_true.ln();
    let correct = argmax(probs) == label;
    let mut abs_sum = 0.0f64;
    for (c, &p) in probs.iter().enumerate() {
        let y = if c == label { 1.0 } else { 0.0 };
        abs_sum += (p as f64 - y).abs();
    }
    (loss, correct, abs_sum)
}

/// Run the model in inference mode over samples, in parallel, returning
/// per-sample class probabilities in input order.
pub fn predict_probs(
    params: &ModelParams<f32>,
    samples: &[Sample],
) -> Result<Vec<[f32; CLASS_COUNT]>> {
    samples
        .par_iter()
        .map(|s| {
            let img = standardize(&s.image);
            // the RNG is unused in inference mode
            let (probs, _) = model_forward(&img, params, Mode::Infer, &mut Pcg32::seed(0, 0))?;
            let mut out = [0.0f32; CLASS_COUNT];
            out.copy_from_slice(probs.data());
            Ok(out)
        })
        .collect()
}

/// Inference-mode metrics over a sample set (no augmentation, no dropout).
pub fn evaluate(params: &ModelParams<f32>, samples: &[Sample]) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Input("cannot evaluate an empty sample set".into()));
    }
    let probs = predict_probs(params, samples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut abs_sum = 0.0;
    for (p, s) in probs.iter().zip(samples) {
        let (l, ok, a) = sample_metrics(p, s.label);
        loss += l;
        correct += ok as usize;
        abs_sum += a;
    }
    let n = samples.len() as f64;
    Ok(Metrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
        mae: abs_sum / (n * CLASS_COUNT as f64),
    })
}

/// One shuffled pass over the training split: fresh augmentation per sample,
/// mini-batches of `cfg.batch_size`, mean-gradient Adam step per batch.
/// Returned metrics are computed over the train-mode outputs seen this epoch.
pub fn train_epoch(
    params: &mut ModelParams<f32>,
    state: &mut AdamState<f32>,
    train: &[Sample],
    cfg: &TrainConfig,
    epoch_rng: &Pcg32,
) -> Result<Metrics> {
    if train.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    let mut shuffle_rng = epoch_rng.derive(0);
    let batches = make_batches(train.len(), cfg.batch_size, &mut shuffle_rng);

    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let mut mae_sum = 0.0f64;

    // per-sample gradients plus (loss, correct, abs-error sum)
    type SampleResult = (ModelParams<f32>, f64, bool, f64);

    let mut position = 0u64;
    for batch in batches {
        let jobs: Vec<(u64, usize)> = batch
            .iter()
            .enumerate()
            .map(|(i, &idx)| (position + i as u64, idx))
            .collect();
        position += batch.len() as u64;

        let results: Result<Vec<SampleResult>> = jobs
            .par_iter()
            .map(|&(pos, idx)| {
                let sample = &train[idx];
                // tag 1 + position: tag 0 is the shuffle stream
                let sample_rng = epoch_rng.derive(1 + pos);
                let mut aug_rng = sample_rng.derive(0);
                let mut drop_rng = sample_rng.derive(1);

                let augmented = augment(&sample.image, &cfg.augment, &mut aug_rng);
                let img = standardize(&augmented);
                let (probs, cache) = model_forward(&img, params, Mode::Train, &mut drop_rng)?;
                let cache = cache.expect("train mode caches");
                let onehot = one_hot::<f32>(sample.label, CLASS_COUNT)?;
                let grad_logits = cross_entropy_grad_logits(&probs, &onehot);
                let grads = model_backward(&grad_logits, &cache, params)?;

                let mut p = [0.0f32; CLASS_COUNT];
                p.copy_from_slice(probs.data());
                let (loss, ok, abs) = sample_metrics(&p, sample.label);
                Ok((grads, loss, ok, abs))
            })
            .collect();

        let results = results?;
        let inv_b = 1.0 / results.len() as f32;
        let mut mean_grads: ModelParams<f32> = ModelParams::zeros();
        for (grads, loss, ok, abs) in &results {
            mean_grads.add_scaled(grads, inv_b);
            loss_sum += loss;
            correct += *ok as usize;
            mae_sum += abs;
        }
        adam_step(params, &mean_grads, state, &cfg.adam)?;
    }

    let n = train.len() as f64;
    Ok(Metrics {
        loss: loss_sum / n,
        accuracy: correct as f64 / n,
        mae: mae_sum / (n * CLASS_COUNT as f64),
    })
}

/// Metrics of one epoch: the training pass and the validation evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: Metrics,
    pub validation: Metrics,
}

/// Train for `cfg.epochs` epochs and keep the parameter snapshot with the
/// lowest validation loss (ties keep the earlier epoch). Returns that best
/// checkpoint plus the full per-epoch history.
pub fn fit(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(Checkpoint, Vec<EpochRecord>)> {
    fit_with_progress(split, cfg, |_| {})
}

/// [`fit`] with a per-epoch callback (used by the CLI to stream progress).
pub fn fit_with_progress(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Checkpoint, Vec<EpochRecord>)> {
    cfg.validate()?;
    if split.train.is_empty() || split.validation.is_empty() || split.test.is_empty() {
        return Err(Error::Input(format!(
            "all three splits must be non-empty (train {}, validation {}, test {})",
            split.train.len(),
            split.validation.len(),
            split.test.len()
        )));
    }

    let root = Pcg32::seed(cfg.seed, TRAIN_STREAM);
    let mut init_rng = root.derive(INIT_TAG);
    let mut params: ModelParams<f32> = ModelParams::init(&mut init_rng);
    let mut state: AdamState<f32> = AdamState::new();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint> = None;

    for epoch in 1..=cfg.epochs {
        let epoch_rng = root.derive(EPOCH_TAG_BASE + epoch as u64);
        let train_metrics = train_epoch(&mut params, &mut state, &split.train, cfg, &epoch_rng)?;
        let val_metrics = evaluate(&params, &split.validation)?;
        let record = EpochRecord {
            epoch,
            train: train_metrics,
            validation: val_metrics,
        };
        on_epoch(&record);
        history.push(record);

        let improved = match &best {
            None => true,
            Some(b) => (val_metrics.loss as f32) < b.meta.val_loss,
        };
        if improved {
            best = Some(Checkpoint {
                params: params.clone(),
                meta: CheckpointMeta {
                    epoch: epoch as u32,
                    val_loss: val_metrics.loss as f32,
                    val_accuracy: val_metrics.accuracy as f32,
                    val_mae: val_metrics.mae as f32,
                    seed: cfg.seed,
                },
            });
        }
    }

    Ok((best.expect("epochs >= 1"), history))
}
