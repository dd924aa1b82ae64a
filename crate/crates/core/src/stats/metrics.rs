//! Ground-truth generalization metrics.

use crate::error::Result;
use crate::types::{LabelVector, PredictionMatrix};

/// Top-1 accuracy: fraction of rows whose argmax equals the label.
pub fn accuracy(p: &PredictionMatrix, y: &LabelVector) -> Result<f64> {
    y.check_against(p)?;
    let hits = p
        .argmax()
        .iter()
        .zip(y.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / p.rows() as f64)
}

/// Unweighted mean of per-class F1 over all K classes of the matrix.
///
/// A class with no true and no predicted samples contributes F1 = 0.
pub fn macro_f1(p: &PredictionMatrix, y: &LabelVector) -> Result<f64> {
    y.check_against(p)?;
    let k = p.cols();
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (pred, &truth) in p.argmax().into_iter().zip(y.as_slice()) {
        if pred == truth {
            tp[pred] += 1;
        } else {
            fp[pred] += 1;
            fn_[truth] += 1;
        }
    }
    let total: f64 = (0..k)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / k as f64)
}
