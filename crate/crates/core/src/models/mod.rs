//! The piano-roll CNN classifier, the melody transformer, their training
//! loops, candidate ranking and evaluation reports.

pub mod cnn;
pub mod ranking;
pub mod report;
pub mod transformer;

use midistring_nn::{NnError, ParamStore, Scalar};
use serde::{Deserialize, Serialize};

pub use cnn::{evaluate_classifier, CnnClassifier, CnnConfig, CnnTrainer, LabeledRoll, CNN_KIND};
pub use ranking::{
    cosine, eval_melody, rank_candidates, CandidateScorer, QueryError, RankedQuery, Ranking,
};
pub use report::{config_hash, EvalReport};
pub use transformer::{
    shift_right, MelodyTrainer, MelodyTransformer, PhrasePair, TransformerConfig, TRANSFORMER_KIND,
};

use crate::metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} outside 0..{classes}")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no usable phrase pairs")]
    NoUsablePairs,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Swaps freshly built parameters for checkpointed ones, requiring identical
/// names and shapes in identical order.
fn adopt_params<T: Scalar>(
    built: &ParamStore<T>,
    loaded: ParamStore<T>,
) -> Result<ParamStore<T>, ModelError> {
    if built.len() != loaded.len() {
        return Err(ModelError::Checkpoint(format!(
            "{} params, model expects {}",
            loaded.len(),
            built.len()
        )));
    }
    for (a, b) in built.iter().zip(loaded.iter()) {
        if a.name != b.name || a.tensor.shape() != b.tensor.shape() {
            return Err(ModelError::Checkpoint(format!(
                "param {} {:?} does not match {} {:?}",
                b.name,
                b.tensor.shape(),
                a.name,
                a.tensor.shape()
            )));
        }
    }
    Ok(loaded)
}

/// Runs `f` over fixed-size chunks on scoped threads; output order follows input order.
fn par_chunks<I: Sync, O: Send, E: Send>(
    items: &[I],
    chunk: usize,
    f: impl Fn(&[I]) -> Result<Vec<O>, E> + Sync,
) -> Result<Vec<O>, E> {
    let chunks: Vec<&[I]> = items.chunks(chunk.max(1)).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(chunks.len())
        .max(1);
    let mut results: Vec<Option<Result<Vec<O>, E>>> = (0..chunks.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let chunks = &chunks;
                let f = &f;
                s.spawn(move || {
                    (w..chunks.len())
                        .step_by(workers)
                        .map(|i| (i, f(chunks[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut out = Vec::with_capacity(items.len());
    for r in results {
        out.extend(r.expect("every chunk ran")?);
    }
    Ok(out)
}
