//! Classification and multi-label losses. Both return the mean over samples/cells.

use crate::error::{NnError, Result};
use crate::scalar::Scalar;

/// Clamp applied to probabilities before taking logs in [`bce_forward`].
pub const BCE_EPS: f64 = 1e-7;

/// Max-subtracted softmax cross-entropy. Returns `(loss, softmax probabilities)`.
pub fn softmax_ce_forward<T: Scalar>(
    logits: &[T],
    classes: usize,
    labels: &[usize],
) -> Result<(T, Vec<T>)> {
    let n = labels.len();
    let mut probs = vec![T::zero(); logits.len()];
    let mut total = T::zero();
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(NnError::LabelOutOfRange { label: y, classes });
        }
        let row = &logits[i * classes..(i + 1) * classes];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum.ln();
        for (c, &z) in row.iter().enumerate() {
            probs[i * classes + c] = (z - max - log_sum).exp();
        }
        total += log_sum - (row[y] - max);
    }
    Ok((total / T::from_f64(n as f64), probs))
}

/// Gradient `(softmax − onehot) / N`, scaled by the upstream gradient.
pub fn softmax_ce_backward<T: Scalar>(
    probs: &[T],
    classes: usize,
    labels: &[usize],
    upstream: T,
) -> Vec<T> {
    let scale = upstream / T::from_f64(labels.len() as f64);
    let mut g: Vec<T> = probs.iter().map(|&p| p * scale).collect();
    for (i, &y) in labels.iter().enumerate() {
        g[i * classes + y] = g[i * classes + y] - scale;
    }
    g
}

pub fn bce_forward<T: Scalar>(probs: &[T], targets: &[T]) -> T {
    let eps = T::from_f64(BCE_EPS);
    let one = T::one();
    let sum: T = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.max(eps).min(one - eps);
            -(y * p.ln() + (one - y) * (one - p).ln())
        })
        .sum();
    sum / T::from_f64(probs.len() as f64)
}

/// Derivative of the clamped loss: zero where the clamp is active.
pub fn bce_backward<T: Scalar>(probs: &[T], targets: &[T], upstream: T) -> Vec<T> {
    let eps = T::from_f64(BCE_EPS);
    let one = T::one();
    let scale = upstream / T::from_f64(probs.len() as f64);
    probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            if p < eps || p > one - eps {
                T::zero()
            } else {
                scale * (p - y) / (p * (one - p))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (loss, _) = softmax_ce_forward(&[0.0f64; 13 * 2], 13, &[3, 12]).unwrap();
        assert!((loss - 13f64.ln()).abs() < 1e-12);
        assert!((13f64.ln() - 2.5649).abs() < 1e-4);
    }

    #[test]
    fn confident_correct_logit_has_vanishing_loss() {
        let mut logits = vec![0.0f64; 5];
        logits[2] = 1e3;
        let (loss, _) = softmax_ce_forward(&logits, 5, &[2]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(softmax_ce_forward(&[0.0f64; 4], 4, &[4]).is_err());
    }

    #[test]
    fn bce_reference_points() {
        assert!(
            (bce_forward(&[0.5f64; 6], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]) - 2f64.ln()).abs() < 1e-12
        );
        let exact = bce_forward(&[1.0f64, 0.0, 1.0], &[1.0, 0.0, 1.0]);
        assert!(exact < 1e-6);
    }
}
