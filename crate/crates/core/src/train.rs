//! Plain SGD, the epoch loop and full-pass evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{augment, sample_stream, AugmentConfig, Dataset, Sample};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::metrics::ConfusionMatrix;
use crate::nn::{LeNetModel, Upstream};
use crate::tensor::Tensor;

/// Samples per forward pass during evaluation.
const EVAL_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub shuffle: bool,
    /// On-the-fly augmentation of training batches; `None` disables it.
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 0.1,
            loss: LossKind::CrossEntropy,
            seed: 42,
            shuffle: true,
            augment: None,
        }
    }
}

impl TrainConfig {
    /// Checks the settings that do not depend on the data.
    ///
    /// A zero learning rate is accepted here (it turns training into a
    /// no-op); front ends that require progress reject it themselves.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if let LossKind::Focal(f) = &self.loss {
            f.validate(num_classes)?;
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Result of a full pass over a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
}

/// `value -= learning_rate * grad` for every parameter.
pub fn sgd_step(model: &mut LeNetModel, learning_rate: f64) {
    model.apply_gradients(learning_rate);
}

/// Stacks samples into a `[N, 1, 32, 32]` batch.
pub fn batch_input<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Tensor> {
    let pixels: Vec<&Tensor> = samples.into_iter().map(|s| &s.pixels).collect();
    Tensor::stack(&pixels)
}

fn check_labels(model: &LeNetModel, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} split has no samples",
            ds.split
        )));
    }
    let k = model.num_classes();
    if let Some(s) = ds.samples.iter().find(|s| s.label >= k) {
        return Err(Error::InvalidLabel {
            label: s.label,
            num_classes: k,
        });
    }
    Ok(())
}

/// Forward pass over every sample. The model is not modified.
///
/// Chunks may be evaluated in parallel; per-sample losses are summed in
/// sample order, so the result is identical for any thread count.
pub fn evaluate(model: &LeNetModel, ds: &Dataset, loss: &LossKind) -> Result<Evaluation> {
    check_labels(model, ds)?;
    let chunks = ds
        .samples
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let x = batch_input(chunk)?;
            let (probs, trace) = model.forward(&x)?;
            let targets: Vec<usize> = chunk.iter().map(|s| s.label).collect();
            let out = loss.compute(trace.logits(), &targets)?;
            Ok((out.per_sample, probs.argmax_rows()?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = 0.0;
    let mut predictions = Vec::with_capacity(ds.len());
    for (losses, preds) in chunks {
        total += losses.iter().sum::<f64>();
        predictions.extend(preds);
    }
    let mut confusion = ConfusionMatrix::new(model.num_classes());
    for (s, &p) in ds.samples.iter().zip(&predictions) {
        confusion.record(s.label, p)?;
    }
    let n = ds.len() as f64;
    Ok(Evaluation {
        mean_loss: total / n,
        accuracy: confusion.trace() as f64 / n,
        confusion,
        predictions,
    })
}

/// Trains for `cfg.epochs` epochs and returns one record per epoch.
pub fn train(
    model: &mut LeNetModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    train_with_observer(model, train_set, val_set, cfg, |_| {})
}

/// Like [`train`], calling `observer` after each completed epoch.
///
/// On a non-finite loss the model is restored to its state at the end of
/// the last completed epoch and [`Error::DivergenceDetected`] is returned.
pub fn train_with_observer(
    model: &mut LeNetModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate(model.num_classes())?;
    check_labels(model, train_set)?;
    check_labels(model, val_set)?;
    if cfg.batch_size > train_set.len() {
        return Err(Error::InvalidConfig(format!(
            "batch_size {} exceeds the {} training samples",
            cfg.batch_size,
            train_set.len()
        )));
    }

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let last_good = model.clone();
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<Sample> = match &cfg.augment {
                Some(aug) => batch
                    .iter()
                    .map(|&i| {
                        let mut rng = sample_stream(aug.seed, epoch, i);
                        augment(&train_set.samples[i], aug, &mut rng)
                    })
                    .collect(),
                None => batch
                    .iter()
                    .map(|&i| train_set.samples[i].clone())
                    .collect(),
            };
            let targets: Vec<usize> = samples.iter().map(|s| s.label).collect();
            let x = batch_input(&samples)?;
            let (_, trace) = model.forward(&x)?;
            let out = cfg.loss.compute(trace.logits(), &targets)?;
            if !out.mean_loss.is_finite() {
                *model = last_good;
                return Err(Error::DivergenceDetected { epoch });
            }
            model.backward(trace, Upstream::Logits(&out.dlogits))?;
            sgd_step(model, cfg.learning_rate);
        }

        let tr = evaluate(model, train_set, &cfg.loss)?;
        let va = evaluate(model, val_set, &cfg.loss)?;
        if !(tr.mean_loss.is_finite() && va.mean_loss.is_finite()) {
            *model = last_good;
            return Err(Error::DivergenceDetected { epoch });
        }
        let record = EpochRecord {
            epoch,
            train_loss: tr.mean_loss,
            train_acc: tr.accuracy,
            val_loss: va.mean_loss,
            val_acc: va.accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4} val_loss {:.4} val_acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.val_loss,
            record.val_acc
        );
        observer(&record);
        records.push(record);
    }
    Ok(records)
}
