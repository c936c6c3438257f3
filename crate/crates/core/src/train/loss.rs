use crate::error::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::InvalidLabel {
            label,
            n_classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[label])
}

/// Loss and its gradient with respect to the logits (`softmax - one_hot`).
pub fn softmax_cross_entropy_grad(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let loss = softmax_cross_entropy(logits, label)?;
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}
