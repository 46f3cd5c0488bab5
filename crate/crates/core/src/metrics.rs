//! Classification and ranking metrics and their chance baselines.

use serde::{Deserialize, Serialize};

/// Candidates per ranking query.
pub const CANDIDATES: usize = 50;
pub const HITS_KS: [usize; 4] = [1, 5, 10, 25];

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("{0} labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
    #[error("class {0} outside 0..{1}")]
    ClassOutOfRange(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// `matrix[true][pred]` counts.
pub fn confusion(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<Vec<Vec<usize>>, MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for c in [t, p] {
            if c >= n_classes {
                return Err(MetricError::ClassOutOfRange(c, n_classes));
            }
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Per-class precision, recall and F1. Undefined ratios count as 0.
pub fn per_class(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
    labels: &[String],
) -> Result<Vec<ClassMetrics>, MetricError> {
    let m = confusion(y_true, y_pred, n_classes)?;
    Ok((0..n_classes)
        .map(|c| {
            let tp = m[c][c] as f64;
            let predicted: usize = (0..n_classes).map(|t| m[t][c]).sum();
            let support: usize = m[c].iter().sum();
            let precision = if predicted > 0 {
                tp / predicted as f64
            } else {
                0.0
            };
            let recall = if support > 0 {
                tp / support as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            let label = labels
                .get(c)
                .cloned()
                .unwrap_or_else(|| format!("class {c}"));
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect())
}

/// Support-weighted mean of per-class F1.
pub fn weighted_f1(
    y_true: &[usize],
    y_pred: &[usize],
    n_classes: usize,
) -> Result<f64, MetricError> {
    let pc = per_class(y_true, y_pred, n_classes, &[])?;
    let n = y_true.len() as f64;
    Ok(pc.iter().map(|c| c.support as f64 / n * c.f1).sum())
}

/// Average precision with a single relevant item at 1-based `rank`.
pub fn average_precision(rank: usize) -> f64 {
    1.0 / rank as f64
}

pub fn mean_average_precision(ranks: &[usize]) -> f64 {
    ranks.iter().map(|&r| average_precision(r)).sum::<f64>() / ranks.len() as f64
}

pub fn hits_at_k(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// 1-based rank of `positive` in a ranking (a permutation of candidate indices).
pub fn rank_of(ranking: &[usize], positive: usize) -> usize {
    ranking
        .iter()
        .position(|&c| c == positive)
        .expect("ranking is a permutation")
        + 1
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|r| 1.0 / r as f64).sum()
}

pub fn chance_accuracy(classes: usize) -> f64 {
    1.0 / classes as f64
}

pub fn chance_hits(k: usize, candidates: usize) -> f64 {
    k as f64 / candidates as f64
}

/// Expected reciprocal rank of one positive under a uniform random ranking.
pub fn chance_map(candidates: usize) -> f64 {
    harmonic(candidates) / candidates as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(weighted_f1(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap(), 1.0);
        let w = weighted_f1(&[0, 0, 1], &[0, 0, 0], 2).unwrap();
        assert!((w - 1.6 / 3.0).abs() < 1e-15);
        assert_eq!(
            weighted_f1(&[0], &[0, 1], 2),
            Err(MetricError::LengthMismatch(1, 2))
        );
        assert_eq!(
            weighted_f1(&[0], &[2], 2),
            Err(MetricError::ClassOutOfRange(2, 2))
        );
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(mean_average_precision(&[1, 1, 1]), 1.0);
        assert_eq!(mean_average_precision(&[2]), 0.5);
        assert_eq!((hits_at_k(&[2], 1), hits_at_k(&[2], 5)), (0.0, 1.0));
        assert_eq!(rank_of(&[3, 0, 1, 2], 0), 2);
    }

    #[test]
    fn chance_values() {
        assert!((chance_accuracy(13) - 0.0769).abs() < 5e-5);
        assert_eq!(chance_accuracy(25), 0.04);
        assert_eq!(chance_hits(5, 50), 0.1);
        assert_eq!(chance_hits(25, 50), 0.5);
        assert!((chance_map(50) - 0.08998410676).abs() < 1e-10);
    }
}
