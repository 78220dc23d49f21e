//! Softmax cross-entropy over a batch of logits.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Mean softmax cross-entropy loss and its gradient w.r.t. the logits.
///
/// The per-sample gradient is `(softmax(z) - onehot(y)) / n`, so each row of
/// the returned gradient sums to zero.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::input(format!(
            "{} logit rows but {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if logits.rows() == 0 {
        return Err(Error::input("cross-entropy on an empty batch".to_string()));
    }
    let classes = logits.cols();
    for (r, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::input(format!(
                "label {y} at row {r} out of range for {classes} classes"
            )));
        }
    }
    let n = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut total = 0.0;
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += (v - max).exp();
        }
        let log_z = max + sum.ln();
        total += log_z - row[labels[r]];
        let grow = grad.row_mut(r);
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            grow[c] = p / n;
        }
        grow[labels[r]] -= 1.0 / n;
    }
    Ok((total / n, grad))
}
