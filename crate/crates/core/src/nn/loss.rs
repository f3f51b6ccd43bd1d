use ndarray::{Array2, ArrayView2, Axis};

use super::real::Real;
use crate::error::{Error, Result};

pub fn softmax<T: Real>(logits: ArrayView2<T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits, `(softmax(z) - onehot(y)) / B`.
pub fn cross_entropy<T: Real>(logits: ArrayView2<T>, targets: &[usize]) -> Result<(T, Array2<T>)> {
    let (batch, classes) = logits.dim();
    if targets.len() != batch {
        return Err(Error::dim(format!("{} targets for a batch of {batch}", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
        return Err(Error::Usage(format!("target {bad} outside [0, {classes})")));
    }
    let probs = softmax(logits);
    let scale = T::one() / T::lit(batch as f64);
    let mut loss = T::zero();
    let mut grad = probs;
    for (i, &t) in targets.iter().enumerate() {
        // log-softmax directly for stability
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += lse - row[t];
        grad[[i, t]] -= T::one();
    }
    grad.mapv_inplace(|g| g * scale);
    Ok((loss * scale, grad))
}

/// Row-wise argmax; ties resolve to the lowest class index.
pub fn argmax_rows<T: Real>(scores: ArrayView2<T>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
