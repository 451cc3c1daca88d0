use super::{NnError, Real};

/// Cross-entropy with the literal `1/N` prefactor over `N` classes:
/// per-sample loss `-(1/N) log softmax(z)[label]`, averaged over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: f64,
    /// d(batch loss) / d(logits), same layout as the logits.
    pub grad: Vec<T>,
}

/// Numerically stable softmax in f64.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Loss of one sample and its logit gradient scaled by `scale`
/// (pass `1 / batch` to get batch-mean gradients).
pub fn sample_loss<T: Real>(logits: &[T], label: usize, scale: f64, grad: &mut [T]) -> f64 {
    let n = logits.len() as f64;
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|v| (v.as_f64() - max).exp()).sum();
    let log_z = max + sum.ln();
    for (j, (g, z)) in grad.iter_mut().zip(logits).enumerate() {
        let p = (z.as_f64() - log_z).exp();
        let target = if j == label { 1.0 } else { 0.0 };
        *g = T::from_f64_lossy(scale * (p - target) / n);
    }
    (log_z - logits[label].as_f64()) / n
}

/// Batch cross-entropy over a row-major `labels.len() x N` logit matrix.
pub fn cross_entropy_loss<T: Real>(logits: &[T], labels: &[usize], n_classes: usize) -> Result<LossOutput<T>, NnError> {
    if n_classes == 0 || logits.len() != labels.len() * n_classes {
        return Err(NnError::ShapeMismatch(format!(
            "{} logits for {} labels over {n_classes} classes",
            logits.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(NnError::LabelOutOfRange { label: bad, n_classes });
    }
    let scale = 1.0 / labels.len() as f64;
    let mut grad = vec![T::zero(); logits.len()];
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = i * n_classes..(i + 1) * n_classes;
        total += sample_loss(&logits[row.clone()], label, scale, &mut grad[row]);
    }
    Ok(LossOutput { loss: total * scale, grad })
}
