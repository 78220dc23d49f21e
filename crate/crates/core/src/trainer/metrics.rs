//! Accuracy and macro-F1.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0usize;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction correct, and the unweighted mean of per-class F1 scores with 0
/// substituted for classes whose F1 is undefined.
pub fn accuracy_and_macro_f1(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<(f64, f64)> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::input(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut correct = 0usize;
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= num_classes || y >= num_classes {
            return Err(Error::input(format!(
                "class index out of range: prediction {p}, label {y}, {num_classes} classes"
            )));
        }
        if p == y {
            correct += 1;
            tp[y] += 1;
        } else {
            fp[p] += 1;
            fn_[y] += 1;
        }
    }
    let accuracy = correct as f64 / predictions.len() as f64;
    let mut f1_sum = 0.0;
    for c in 0..num_classes {
        let precision = if tp[c] + fp[c] > 0 {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        } else {
            0.0
        };
        let recall = if tp[c] + fn_[c] > 0 {
            tp[c] as f64 / (tp[c] + fn_[c]) as f64
        } else {
            0.0
        };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok((accuracy, f1_sum / num_classes as f64))
}
