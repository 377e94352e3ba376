use crate::error::{DdscError, Result};

/// Mean over classes of per-class accuracy. Labels are 0-based.
pub fn classwise_accuracy(predictions: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(DdscError::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(DdscError::EmptyDataset);
    }
    let mut correct = vec![0usize; classes];
    let mut total = vec![0usize; classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if t >= classes {
            return Err(DdscError::ClassOutOfRange { class: t, classes });
        }
        if p >= classes {
            return Err(DdscError::ClassOutOfRange { class: p, classes });
        }
        total[t] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    if let Some(missing) = total.iter().position(|n| *n == 0) {
        return Err(DdscError::UndefinedClassAccuracy(missing));
    }
    let sum: f64 = correct.iter().zip(&total).map(|(c, n)| *c as f64 / *n as f64).sum();
    Ok(sum / classes as f64)
}
