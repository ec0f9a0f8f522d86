//! Confusion matrices and the accuracy / sensitivity / specificity family.
//!
//! Counting is exact integer arithmetic; the only floating-point operation
//! is the final division. A ratio whose denominator is zero is undefined and
//! comes back as `None`, never as 0 or 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[true][pred]` sample counts over `k` classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![vec![0; k]; k],
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::shape("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        for label in [truth, pred] {
            if label >= self.k {
                return Err(Error::InvalidLabel {
                    label,
                    num_classes: self.k,
                });
            }
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.counts[i][i]).sum()
    }

    /// Multiclass accuracy, `trace / total`.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.trace(), self.total())
    }

    /// One-vs-rest counts treating `class` as the positive class.
    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let mut bc = BinaryCounts::default();
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                bc.add(t == class, p == class, c);
            }
        }
        bc
    }
}

/// Tallies `(truth, pred)` pairs into a `k`-class confusion matrix.
pub fn confusion(truth: &[usize], pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&t, &p) in truth.iter().zip(pred) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        BinaryCounts { tp, fp, tn, fn_ }
    }

    fn add(&mut self, truth_pos: bool, pred_pos: bool, count: u64) {
        match (truth_pos, pred_pos) {
            (true, true) => self.tp += count,
            (false, true) => self.fp += count,
            (false, false) => self.tn += count,
            (true, false) => self.fn_ += count,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(TP + TN) / (TP + FP + TN + FN)`.
pub fn accuracy(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tp + bc.tn, bc.total())
}

/// True positive rate, `TP / (TP + FN)`.
pub fn sensitivity(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tp, bc.tp + bc.fn_)
}

/// True negative rate, `TN / (TN + FP)`.
pub fn specificity(bc: &BinaryCounts) -> Option<f64> {
    ratio(bc.tn, bc.tn + bc.fp)
}

/// Collapses a multiclass matrix to positive-vs-negative counts.
///
/// A sample is a true positive when both its true and predicted classes are
/// in `positive`, so confusing benign with malignant still counts as a
/// correctly detected nodule.
pub fn binarize(cm: &ConfusionMatrix, positive: &[usize]) -> Result<BinaryCounts> {
    let mut is_pos = vec![false; cm.k];
    for &c in positive {
        if c >= cm.k {
            return Err(Error::InvalidLabel {
                label: c,
                num_classes: cm.k,
            });
        }
        is_pos[c] = true;
    }
    let n_pos = is_pos.iter().filter(|&&p| p).count();
    if n_pos == 0 || n_pos == cm.k {
        return Err(Error::InvalidPartition(format!(
            "positive classes must be a non-empty proper subset of {} classes",
            cm.k
        )));
    }
    let mut bc = BinaryCounts::default();
    for (t, row) in cm.counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            bc.add(is_pos[t], is_pos[p], c);
        }
    }
    Ok(bc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    BinarizedNodule,
    MacroOvr,
    PerClass,
}

/// One-vs-rest metrics for a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub class_name: Option<String>,
    pub support: u64,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn per_class(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.k)
        .map(|c| {
            let bc = cm.one_vs_rest(c);
            ClassMetrics {
                class_index: c,
                class_name: None,
                support: bc.tp + bc.fn_,
                accuracy: accuracy(&bc),
                sensitivity: sensitivity(&bc),
                specificity: specificity(&bc),
            }
        })
        .collect()
}

fn defined_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Unweighted mean of one-vs-rest sensitivity and specificity over the
/// classes where each is defined; accuracy is `trace / total`.
pub fn macro_report(cm: &ConfusionMatrix) -> Result<MetricTriple> {
    if cm.k < 2 {
        return Err(Error::InvalidPartition(
            "macro averaging needs at least 2 classes".into(),
        ));
    }
    let classes = per_class(cm);
    Ok(MetricTriple {
        accuracy: cm.accuracy(),
        sensitivity: defined_mean(classes.iter().map(|c| c.sensitivity)),
        specificity: defined_mean(classes.iter().map(|c| c.specificity)),
    })
}

/// Full report: all three views of one confusion matrix, with the view
/// chosen by `mode` copied into the headline fields.
///
/// In `per_class` mode the headline accuracy is the multiclass accuracy and
/// the headline sensitivity and specificity are `None`; the per-class list
/// carries those numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mode: MetricMode,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// `trace / total` over all classes.
    pub multiclass_accuracy: Option<f64>,
    pub positive_classes: Vec<usize>,
    pub binary_counts: BinaryCounts,
    pub binarized: MetricTriple,
    pub macro_ovr: MetricTriple,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricReport {
    pub fn build(
        cm: &ConfusionMatrix,
        positive: &[usize],
        class_names: Option<&[String]>,
        mode: MetricMode,
    ) -> Result<Self> {
        let bc = binarize(cm, positive)?;
        let binarized = MetricTriple {
            accuracy: accuracy(&bc),
            sensitivity: sensitivity(&bc),
            specificity: specificity(&bc),
        };
        let macro_ovr = macro_report(cm)?;
        let mut classes = per_class(cm);
        if let Some(names) = class_names {
            for c in &mut classes {
                c.class_name = names.get(c.class_index).cloned();
            }
        }
        let headline = match mode {
            MetricMode::BinarizedNodule => binarized.clone(),
            MetricMode::MacroOvr => macro_ovr.clone(),
            MetricMode::PerClass => MetricTriple {
                accuracy: cm.accuracy(),
                sensitivity: None,
                specificity: None,
            },
        };
        Ok(MetricReport {
            mode,
            accuracy: headline.accuracy,
            sensitivity: headline.sensitivity,
            specificity: headline.specificity,
            multiclass_accuracy: cm.accuracy(),
            positive_classes: positive.to_vec(),
            binary_counts: bc,
            binarized,
            macro_ovr,
            per_class: classes,
            confusion: cm.counts.clone(),
        })
    }
}

/// Default positive set: every class not named `normal` (case-insensitive).
/// Falls back to all classes but the last when no class has that name.
pub fn nodule_classes(class_names: &[String]) -> Vec<usize> {
    let pos: Vec<usize> = class_names
        .iter()
        .enumerate()
        .filter(|(_, n)| !n.eq_ignore_ascii_case("normal"))
        .map(|(i, _)| i)
        .collect();
    if pos.len() == class_names.len() {
        (0..class_names.len().saturating_sub(1)).collect()
    } else {
        pos
    }
}
