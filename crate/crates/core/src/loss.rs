//! Cross-entropy and focal loss over logits.
//!
//! Both losses fuse the softmax: they take pre-softmax logits, evaluate
//! `ln p` through a shifted log-sum-exp, and return the gradient of the
//! batch-mean loss with respect to the logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Lower clamp applied to the target probability before taking its log.
pub const MIN_PROB: f64 = 1e-12;

/// Focusing exponent and per-class weights for focal loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    /// One weight per class. Empty means 1.0 for every class.
    #[serde(default)]
    pub alpha: Vec<f64>,
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig {
            gamma: 2.0,
            alpha: Vec::new(),
        }
    }
}

impl FocalConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "focal gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if !self.alpha.is_empty() && self.alpha.len() != num_classes {
            return Err(Error::InvalidConfig(format!(
                "focal alpha has {} entries for {num_classes} classes",
                self.alpha.len()
            )));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "focal alpha entries must be positive, got {a}"
            )));
        }
        Ok(())
    }

    fn alpha_for(&self, class: usize) -> f64 {
        self.alpha.get(class).copied().unwrap_or(1.0)
    }
}

/// Per-class weights proportional to inverse class frequency, scaled so a
/// perfectly balanced split gets 1.0 everywhere: `total / (k * count_c)`.
///
/// Classes with no samples get the largest weight of the present classes.
pub fn inverse_frequency_alpha(labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset(
            "cannot derive class weights from zero labels".into(),
        ));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::InvalidLabel {
                label: l,
                num_classes,
            });
        }
        counts[l] += 1;
    }
    let total = labels.len() as f64;
    let k = num_classes as f64;
    let mut alpha: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { total / (k * c as f64) })
        .collect();
    let max = alpha.iter().copied().fold(0.0, f64::max);
    for a in alpha.iter_mut().filter(|a| **a == 0.0) {
        *a = max;
    }
    Ok(alpha)
}

/// Which loss drives training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Focal(FocalConfig),
}

impl LossKind {
    pub fn compute(&self, logits: &Tensor, targets: &[usize]) -> Result<LossOutput> {
        match self {
            LossKind::CrossEntropy => cross_entropy(logits, targets),
            LossKind::Focal(cfg) => focal_loss(logits, targets, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Focal(_) => "focal",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossOutput {
    pub mean_loss: f64,
    /// Loss of each sample, in batch order.
    pub per_sample: Vec<f64>,
    /// Gradient of `mean_loss` with respect to the logits.
    pub dlogits: Tensor,
}

struct Softmaxed {
    probs: Vec<f64>,
    log_pt: Vec<f64>,
    k: usize,
}

fn softmax_targets(logits: &Tensor, targets: &[usize]) -> Result<Softmaxed> {
    let (n, k) = logits.dims2()?;
    if targets.len() != n {
        return Err(Error::shape(format!(
            "{} targets for a batch of {n}",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::InvalidLabel {
            label: bad,
            num_classes: k,
        });
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut log_pt = Vec::with_capacity(n);
    for (row, &t) in logits.data().chunks_exact(k).zip(targets) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = row.iter().map(|&z| (z - m).exp()).sum();
        let log_total = total.ln();
        probs.extend(row.iter().map(|&z| (z - m).exp() / total));
        log_pt.push(clamp_low(row[t] - m - log_total, MIN_PROB.ln()));
    }
    Ok(Softmaxed { probs, log_pt, k })
}

/// Like `v.max(lo)` but lets NaN through, so a diverged batch stays visible.
fn clamp_low(v: f64, lo: f64) -> f64 {
    if v < lo {
        lo
    } else {
        v
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean of `-ln p[target]` over the batch.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<LossOutput> {
    let sm = softmax_targets(logits, targets)?;
    let n = targets.len() as f64;
    let per_sample: Vec<f64> = sm.log_pt.iter().map(|&l| -l).collect();
    let mut grad = sm.probs;
    for (row, &t) in grad.chunks_exact_mut(sm.k).zip(targets) {
        row[t] -= 1.0;
        for g in row.iter_mut() {
            *g /= n;
        }
    }
    Ok(LossOutput {
        mean_loss: mean(&per_sample),
        per_sample,
        dlogits: Tensor::new(logits.shape(), grad)?,
    })
}

/// Mean of `-alpha[t] * (1 - p_t)^gamma * ln p_t` over the batch.
pub fn focal_loss(logits: &Tensor, targets: &[usize], cfg: &FocalConfig) -> Result<LossOutput> {
    let sm = softmax_targets(logits, targets)?;
    cfg.validate(sm.k)?;
    let n = targets.len() as f64;
    let gamma = cfg.gamma;
    let mut per_sample = Vec::with_capacity(targets.len());
    let mut grad = sm.probs;
    for ((row, &t), &log_pt) in grad.chunks_exact_mut(sm.k).zip(targets).zip(&sm.log_pt) {
        let alpha = cfg.alpha_for(t);
        let pt = clamp_low(row[t], MIN_PROB);
        let q = 1.0 - pt;
        let modulator = q.powf(gamma);
        per_sample.push(-alpha * modulator * log_pt);

        // dL/dz_j = g * (delta_tj - p_j) with
        // g = alpha * (gamma * (1-pt)^(gamma-1) * pt * ln pt - (1-pt)^gamma).
        let focus = if gamma == 0.0 || q == 0.0 {
            0.0
        } else {
            gamma * q.powf(gamma - 1.0) * pt * log_pt
        };
        let g = alpha * (focus - modulator);
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if j == t { 1.0 } else { 0.0 };
            *v = g * (delta - *v) / n;
        }
    }
    Ok(LossOutput {
        mean_loss: mean(&per_sample),
        per_sample,
        dlogits: Tensor::new(logits.shape(), grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn logits(n: usize, k: usize, vals: Vec<f64>) -> Tensor {
        Tensor::new(&[n, k], vals).unwrap()
    }

    #[test]
    fn nan_logits_are_not_clamped_away() {
        let z = logits(1, 3, vec![f64::NAN, 0.0, 0.0]);
        assert!(cross_entropy(&z, &[1]).unwrap().mean_loss.is_nan());
        assert!(focal_loss(&z, &[1], &FocalConfig::default())
            .unwrap()
            .mean_loss
            .is_nan());
    }

    #[test]
    fn confident_prediction_has_zero_loss() {
        let out = cross_entropy(&logits(1, 3, vec![50.0, 0.0, 0.0]), &[0]).unwrap();
        assert!(out.mean_loss < 1e-20);
        let f = focal_loss(
            &logits(1, 3, vec![50.0, 0.0, 0.0]),
            &[0],
            &FocalConfig::default(),
        )
        .unwrap();
        assert!(f.mean_loss < 1e-20);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let out = cross_entropy(&logits(2, 3, vec![0.4; 6]), &[0, 2]).unwrap();
        assert!((out.mean_loss - 3f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn focal_scalar_value() {
        // Two classes with p_t = 0.9: logits [ln 9, 0].
        let z = logits(1, 2, vec![9f64.ln(), 0.0]);
        let cfg = FocalConfig {
            gamma: 2.0,
            alpha: vec![1.0, 1.0],
        };
        let out = focal_loss(&z, &[0], &cfg).unwrap();
        let expected = 0.1f64.powi(2) * -(0.9f64.ln());
        assert!((out.mean_loss - expected).abs() < 1e-15);
        assert!((out.mean_loss - 1.05361e-3).abs() < 1e-8);
    }

    #[test]
    fn errors() {
        let z = logits(1, 3, vec![0.0; 3]);
        assert!(matches!(
            cross_entropy(&z, &[3]),
            Err(Error::InvalidLabel { label: 3, .. })
        ));
        let cfg = FocalConfig {
            gamma: -1.0,
            alpha: vec![],
        };
        assert!(matches!(
            focal_loss(&z, &[0], &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = FocalConfig {
            gamma: 1.0,
            alpha: vec![1.0, 0.0, 1.0],
        };
        assert!(focal_loss(&z, &[0], &cfg).is_err());
        assert!(cross_entropy(&z, &[0, 1]).is_err());
    }

    #[test]
    fn inverse_frequency_weights() {
        let labels: Vec<usize> = std::iter::repeat_n(0, 120)
            .chain(std::iter::repeat_n(1, 561))
            .chain(std::iter::repeat_n(2, 416))
            .collect();
        let a = inverse_frequency_alpha(&labels, 3).unwrap();
        assert!((a[0] - 1097.0 / 360.0).abs() < 1e-12);
        assert!(a[0] > a[2] && a[2] > a[1]);
        assert_eq!(
            inverse_frequency_alpha(&[0, 1, 2], 3).unwrap(),
            vec![1.0; 3]
        );
        assert_eq!(
            inverse_frequency_alpha(&[0, 0, 1], 3).unwrap(),
            vec![0.5, 1.0, 1.0]
        );
    }

    fn batch() -> impl Strategy<Value = (usize, Vec<f64>, Vec<usize>)> {
        (1usize..6, 2usize..5).prop_flat_map(|(n, k)| {
            (
                Just(k),
                prop::collection::vec(-6.0f64..6.0, n * k),
                prop::collection::vec(0..k, n),
            )
        })
    }

    proptest! {
        #[test]
        fn focal_gamma_zero_is_cross_entropy((k, z, t) in batch()) {
            let z = logits(t.len(), k, z);
            let ce = cross_entropy(&z, &t).unwrap();
            let fl = focal_loss(&z, &t, &FocalConfig { gamma: 0.0, alpha: vec![1.0; k] }).unwrap();
            prop_assert!((ce.mean_loss - fl.mean_loss).abs() <= 1e-12);
            for (a, b) in ce.dlogits.data().iter().zip(fl.dlogits.data()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn focal_never_exceeds_cross_entropy((k, z, t) in batch(), gamma in 0.01f64..5.0) {
            let z = logits(t.len(), k, z);
            let ce = cross_entropy(&z, &t).unwrap();
            let fl = focal_loss(&z, &t, &FocalConfig { gamma, alpha: vec![] }).unwrap();
            for (f, c) in fl.per_sample.iter().zip(&ce.per_sample) {
                prop_assert!(f <= c);
            }
        }

        #[test]
        fn ce_gradient_rows_sum_to_zero((k, z, t) in batch()) {
            let z = logits(t.len(), k, z);
            let ce = cross_entropy(&z, &t).unwrap();
            for row in ce.dlogits.data().chunks(k) {
                prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12);
            }
        }

        #[test]
        fn batch_order_does_not_change_mean((k, z, t) in batch(), gamma in 0.0f64..3.0) {
            let n = t.len();
            let rev_z: Vec<f64> = z.chunks(k).rev().flatten().copied().collect();
            let rev_t: Vec<usize> = t.iter().rev().copied().collect();
            let a = logits(n, k, z);
            let b = logits(n, k, rev_z);
            let cfg = FocalConfig { gamma, alpha: vec![] };
            let ce = (cross_entropy(&a, &t).unwrap(), cross_entropy(&b, &rev_t).unwrap());
            prop_assert!((ce.0.mean_loss - ce.1.mean_loss).abs() <= 1e-12);
            let fl = (focal_loss(&a, &t, &cfg).unwrap(), focal_loss(&b, &rev_t, &cfg).unwrap());
            prop_assert!((fl.0.mean_loss - fl.1.mean_loss).abs() <= 1e-12);
        }
    }
}
