//! Run configuration: a flat JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use lenet_core::data::AugmentConfig;
use lenet_core::loss::{inverse_frequency_alpha, FocalConfig};
use lenet_core::metrics::{nodule_classes, MetricMode};
use lenet_core::{LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum LossName {
    CrossEntropy,
    Focal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPreset {
    Uniform,
    InverseFrequency,
}

/// Focal class weights: a preset name or one explicit weight per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Preset(AlphaPreset),
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub loss: LossName,
    pub gamma: f64,
    pub alpha: AlphaSpec,
    pub augment: bool,
    pub hflip_prob: f64,
    pub max_rotation_deg: f64,
    pub max_shift_px: usize,
    pub augment_fill: f64,
    pub metrics_mode: MetricMode,
    /// Class names counted as positive when binarizing; defaults to every
    /// class not named `normal`.
    pub positive_classes: Option<Vec<String>>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let aug = AugmentConfig::default();
        RunConfig {
            data: None,
            out: None,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            seed: train.seed,
            shuffle: train.shuffle,
            loss: LossName::CrossEntropy,
            gamma: FocalConfig::default().gamma,
            alpha: AlphaSpec::Preset(AlphaPreset::Uniform),
            augment: false,
            hflip_prob: aug.hflip_prob,
            max_rotation_deg: aug.max_rotation_deg,
            max_shift_px: aug.max_shift_px,
            augment_fill: aug.fill,
            metrics_mode: MetricMode::BinarizedNodule,
            positive_classes: None,
            threads: None,
        }
    }
}

/// Flag values that override the config file when present.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub loss: Option<LossName>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        let o = overrides;
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(seed, loss, gamma, epochs, learning_rate, batch_size);
        if o.data.is_some() {
            cfg.data = o.data;
        }
        if o.out.is_some() {
            cfg.out = o.out;
        }
        if o.threads.is_some() {
            cfg.threads = o.threads;
        }
        Ok(cfg)
    }

    /// Checks everything that does not need the dataset.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.epochs == 0 {
            return Err(CliError::config("epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CliError::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads must be at least 1"));
        }
        if let Some(pos) = &self.positive_classes {
            if pos.is_empty() {
                return Err(CliError::config("positive_classes must not be empty"));
            }
        }
        if let AlphaSpec::Weights(w) = &self.alpha {
            if w.is_empty() {
                return Err(CliError::config("alpha weight list must not be empty"));
            }
        }
        // Data-independent parts of the training config; the class count is
        // not known yet, so alpha length is checked in `train_config`.
        let mut probe = self.train_config_with_alpha(Vec::new());
        probe.loss = match probe.loss {
            LossKind::Focal(f) => LossKind::Focal(FocalConfig {
                alpha: Vec::new(),
                ..f
            }),
            other => other,
        };
        probe.validate(2)?;
        if let AlphaSpec::Weights(w) = &self.alpha {
            FocalConfig {
                gamma: self.gamma,
                alpha: w.clone(),
            }
            .validate(w.len())?;
        }
        Ok(())
    }

    pub fn augment_config(&self) -> Option<AugmentConfig> {
        self.augment.then_some(AugmentConfig {
            hflip_prob: self.hflip_prob,
            max_rotation_deg: self.max_rotation_deg,
            max_shift_px: self.max_shift_px,
            seed: self.seed,
            fill: self.augment_fill,
        })
    }

    fn train_config_with_alpha(&self, alpha: Vec<f64>) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            loss: match self.loss {
                LossName::CrossEntropy => LossKind::CrossEntropy,
                LossName::Focal => LossKind::Focal(FocalConfig {
                    gamma: self.gamma,
                    alpha,
                }),
            },
            seed: self.seed,
            shuffle: self.shuffle,
            augment: self.augment_config(),
        }
    }

    /// The core training config, with alpha resolved against the training labels.
    pub fn train_config(
        &self,
        labels: &[usize],
        num_classes: usize,
    ) -> Result<TrainConfig, CliError> {
        let alpha = match &self.alpha {
            AlphaSpec::Preset(AlphaPreset::Uniform) => Vec::new(),
            AlphaSpec::Preset(AlphaPreset::InverseFrequency) => {
                inverse_frequency_alpha(labels, num_classes)?
            }
            AlphaSpec::Weights(w) => w.clone(),
        };
        let cfg = self.train_config_with_alpha(alpha);
        cfg.validate(num_classes)?;
        Ok(cfg)
    }
}

/// Resolves positive class names to indices, or applies the default.
pub fn positive_indices(
    names: Option<&[String]>,
    class_names: &[String],
) -> Result<Vec<usize>, CliError> {
    let Some(names) = names else {
        return Ok(nodule_classes(class_names));
    };
    names
        .iter()
        .map(|n| {
            class_names.iter().position(|c| c == n).ok_or_else(|| {
                CliError::config(format!(
                    "positive class {n:?} is not one of {class_names:?}"
                ))
            })
        })
        .collect()
}
