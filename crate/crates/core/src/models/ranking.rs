use super::report::{hits_key, EvalReport};
use super::ModelError;
use crate::metrics::{hits_at_k, mean_average_precision, rank_of, CANDIDATES, HITS_KS};
use crate::pianoroll::PhraseRoll;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query {id:?} has {found} candidates, expected {CANDIDATES}")]
    CandidateCount { id: String, found: usize },
    #[error("query {id:?} positive index {index} out of range")]
    PositiveIndex { id: String, index: usize },
}

/// A source phrase, 50 candidate continuations and the index of the true one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedQuery {
    pub id: String,
    pub source: PhraseRoll,
    pub candidates: Vec<PhraseRoll>,
    pub positive_index: usize,
}

impl RankedQuery {
    pub fn new(
        id: impl Into<String>,
        source: PhraseRoll,
        candidates: Vec<PhraseRoll>,
        positive_index: usize,
    ) -> Result<Self, QueryError> {
        let id = id.into();
        if candidates.len() != CANDIDATES {
            return Err(QueryError::CandidateCount {
                id,
                found: candidates.len(),
            });
        }
        if positive_index >= CANDIDATES {
            return Err(QueryError::PositiveIndex {
                id,
                index: positive_index,
            });
        }
        Ok(Self {
            id,
            source,
            candidates,
            positive_index,
        })
    }
}

/// Anything that yields a `[steps × pitches]` probability matrix per candidate
/// with the candidate as the decoder's teacher-forced input.
pub trait CandidateScorer: Sync {
    fn probabilities(
        &self,
        source: &PhraseRoll,
        candidates: &[PhraseRoll],
    ) -> Result<Vec<Vec<f32>>, ModelError>;
}

/// Cosine similarity of a probability vector and a binary vector, or `None`
/// when either has zero norm.
pub fn cosine(probs: &[f32], cells: &[u8]) -> Option<f64> {
    let (mut dot, mut pp, mut cc) = (0.0f64, 0.0f64, 0.0f64);
    for (&p, &c) in probs.iter().zip(cells) {
        let (p, c) = (f64::from(p), f64::from(c));
        dot += p * c;
        pp += p * p;
        cc += c * c;
    }
    (pp > 0.0 && cc > 0.0).then(|| dot / (pp.sqrt() * cc.sqrt()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    /// Candidate indices, best first.
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    /// Candidates with an undefined cosine, scored −1.
    pub degenerate: Vec<usize>,
}

/// Scores every candidate and sorts descending; ties keep ascending index.
pub fn rank_candidates(
    scorer: &dyn CandidateScorer,
    query: &RankedQuery,
) -> Result<Ranking, ModelError> {
    let probs = scorer.probabilities(&query.source, &query.candidates)?;
    let mut degenerate = Vec::new();
    let scores: Vec<f64> = probs
        .iter()
        .zip(&query.candidates)
        .enumerate()
        .map(|(i, (p, c))| {
            cosine(p, c.data()).unwrap_or_else(|| {
                degenerate.push(i);
                -1.0
            })
        })
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(Ranking {
        order,
        scores,
        degenerate,
    })
}

/// MAP and HITS@{1,5,10,25} over queries, evaluated on scoped threads.
pub fn eval_melody(
    scorer: &dyn CandidateScorer,
    queries: &[RankedQuery],
    seed: u64,
    config_hash: String,
) -> Result<EvalReport, ModelError> {
    if queries.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let ranks = super::par_chunks(queries, 1, |q| {
        let r = rank_candidates(scorer, &q[0])?;
        if !r.degenerate.is_empty() {
            log::warn!(
                "query {}: all-zero candidates {:?} scored -1",
                q[0].id,
                r.degenerate
            );
        }
        Ok::<_, ModelError>(vec![rank_of(&r.order, q[0].positive_index)])
    })?;
    let mut report = EvalReport::new("melody", queries.len(), seed, config_hash);
    report
        .metrics
        .insert("map".into(), mean_average_precision(&ranks));
    for k in HITS_KS {
        report.metrics.insert(hits_key(k), hits_at_k(&ranks, k));
    }
    Ok(report)
}
