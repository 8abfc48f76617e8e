use super::layers::softmax;
use super::Tensor;
use crate::error::{Error, Result};

fn check_batch(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let (n, c) = match logits.shape() {
        [n, c] => (*n, *c),
        other => {
            return Err(Error::InvalidShape(format!(
                "logits must be [batch × classes], got {other:?}"
            )))
        }
    };
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidLabel {
            label: bad,
            classes: c,
        });
    }
    Ok((n, c))
}

/// Row-wise softmax of a `[N × C]` tensor.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (n, c) = match logits.shape() {
        [n, c] => (*n, *c),
        other => {
            return Err(Error::InvalidShape(format!(
                "logits must be [batch × classes], got {other:?}"
            )))
        }
    };
    let mut data = Vec::with_capacity(n * c);
    for i in 0..n {
        data.extend(softmax(logits.row(i)));
    }
    Tensor::new(vec![n, c], data)
}

/// Mean sparse categorical cross-entropy and its gradient w.r.t. the logits,
/// `(softmax − onehot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, _) = check_batch(logits, labels)?;
    let mut grad = softmax_rows(logits)?;
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
        grad.row_mut(i)[label] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    grad.scale(inv);
    Ok((loss * inv, grad))
}
