//! Evaluation: confusion matrix, accuracy, and support-weighted
//! precision/recall/F1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::EmotionLabel;

/// Square matrix of counts; rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label sequences differ in length: {true_len} true vs {pred_len} predicted")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("class index {index} is out of range for {k} classes")]
    ClassOutOfRange { index: usize, k: usize },
    #[error("confusion matrix rows must all have length {k}")]
    RaggedRows { k: usize },
    #[error("cannot compute metrics over zero evaluated pairs")]
    EmptyMatrix,
}

impl ConfusionMatrix {
    /// Tallies `(true, predicted)` pairs of class indices into a k-class
    /// matrix.
    pub fn from_pairs(
        y_true: &[usize],
        y_pred: &[usize],
        k: usize,
    ) -> Result<ConfusionMatrix, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch {
                true_len: y_true.len(),
                pred_len: y_pred.len(),
            });
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= k {
                return Err(MetricsError::ClassOutOfRange { index: t, k });
            }
            if p >= k {
                return Err(MetricsError::ClassOutOfRange { index: p, k });
            }
            counts[t * k + p] += 1;
        }
        Ok(ConfusionMatrix { k, counts })
    }

    /// Tallies emotion-label pairs into the fixed 5-class matrix.
    pub fn from_labels(
        y_true: &[EmotionLabel],
        y_pred: &[EmotionLabel],
    ) -> Result<ConfusionMatrix, MetricsError> {
        let t: Vec<usize> = y_true.iter().map(|l| l.index()).collect();
        let p: Vec<usize> = y_pred.iter().map(|l| l.index()).collect();
        Self::from_pairs(&t, &p, EmotionLabel::COUNT)
    }

    /// Builds a matrix from explicit row-major counts.
    pub fn from_counts(rows: Vec<Vec<u64>>) -> Result<ConfusionMatrix, MetricsError> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(MetricsError::RaggedRows { k });
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, true_class: usize, predicted_class: usize) -> u64 {
        self.counts[true_class * self.k + predicted_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row sum: number of evaluated pairs whose true class is `class`.
    pub fn support(&self, class: usize) -> u64 {
        (0..self.k).map(|p| self.get(class, p)).sum()
    }

    fn predicted_total(&self, class: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, class)).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.k)
            .map(|t| (0..self.k).map(|p| self.get(t, p)).collect())
            .collect()
    }
}

/// Aggregation mode for multi-class precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Support-weighted mean of per-class values.
    Weighted,
    /// Unweighted mean of per-class values.
    Macro,
}

/// Per-class precision, recall, F1 and support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Aggregate evaluation report. The weighted aggregates are support-weighted
/// means of the per-class values, with empty-denominator cells scored as 0;
/// weighted recall coincides with accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<PerClassMetrics>,
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Computes the metric report from a confusion matrix.
///
/// Per-class precision is the column diagonal over the column sum (0 when the
/// column is empty), recall the row diagonal over the row sum, and F1 their
/// harmonic mean. Accuracy is trace over total. Weighted recall is computed
/// through its algebraically identical form (trace over total) so it equals
/// accuracy exactly, not merely within rounding.
pub fn compute_metrics(matrix: &ConfusionMatrix) -> Result<MetricReport, MetricsError> {
    let total = matrix.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut per_class = Vec::with_capacity(matrix.k());
    for class in 0..matrix.k() {
        let diagonal = matrix.get(class, class);
        let precision = ratio(diagonal, matrix.predicted_total(class));
        let recall = ratio(diagonal, matrix.support(class));
        per_class.push(PerClassMetrics {
            precision,
            recall,
            f1: f1_from(precision, recall),
            support: matrix.support(class),
        });
    }
    let accuracy = matrix.trace() as f64 / total as f64;
    Ok(MetricReport {
        accuracy,
        weighted_precision: weighted_mean(
            per_class.iter().map(|m| (m.precision, m.support)),
            total,
        ),
        weighted_recall: accuracy,
        weighted_f1: weighted_mean(per_class.iter().map(|m| (m.f1, m.support)), total),
        per_class,
    })
}

/// Aggregate precision/recall/F1 under an explicit averaging mode.
pub fn averaged_metrics(
    matrix: &ConfusionMatrix,
    averaging: Averaging,
) -> Result<(f64, f64, f64), MetricsError> {
    let report = compute_metrics(matrix)?;
    match averaging {
        Averaging::Weighted => Ok((
            report.weighted_precision,
            report.weighted_recall,
            report.weighted_f1,
        )),
        Averaging::Macro => {
            let k = report.per_class.len() as f64;
            let sum = report.per_class.iter().fold((0.0, 0.0, 0.0), |acc, m| {
                (acc.0 + m.precision, acc.1 + m.recall, acc.2 + m.f1)
            });
            Ok((sum.0 / k, sum.1 / k, sum.2 / k))
        }
    }
}

fn weighted_mean(values: impl Iterator<Item = (f64, u64)>, total: u64) -> f64 {
    values.map(|(v, s)| v * s as f64).sum::<f64>() / total as f64
}

/// Shorthand: confusion matrix over label pairs, then the metric report.
pub fn evaluate_labels(
    y_true: &[EmotionLabel],
    y_pred: &[EmotionLabel],
) -> Result<MetricReport, MetricsError> {
    compute_metrics(&ConfusionMatrix::from_labels(y_true, y_pred)?)
}
