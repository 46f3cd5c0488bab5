//! Ranking query files.
//!
//! One JSON object per line:
//!
//! ```json
//! {"id": "q0", "source": ROLL, "candidates": [ROLL, ...50], "positive_index": 7}
//! ```
//!
//! A `ROLL` is a 64×128 phrase roll in one of two encodings:
//! - dense: an array of 64 rows, each an array of 128 zeros and ones
//! - runs: `{"runs": [[pitch, start_step, length], ...]}` where each run
//!   marks `length` consecutive active steps of one pitch
//!
//! The writer always uses runs, sorted by start step then pitch.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use midistring_nn::rng::{stream_rng, sub_seed};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::CANDIDATES;
use crate::models::{PhrasePair, QueryError, RankedQuery};
use crate::pianoroll::{PhraseRoll, PHRASE_STEPS, PITCHES};

#[derive(Debug, thiserror::Error)]
pub enum QueryFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: QueryError },
    #[error("no queries in file")]
    Empty,
    #[error("{0} phrase pairs; at least {CANDIDATES} are needed to build queries")]
    TooFewPairs(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RollRepr {
    Runs { runs: Vec<[usize; 3]> },
    Dense(Vec<Vec<u8>>),
}

#[derive(Serialize, Deserialize)]
struct QueryRepr {
    id: String,
    source: RollRepr,
    candidates: Vec<RollRepr>,
    positive_index: usize,
}

fn encode_roll(roll: &PhraseRoll) -> RollRepr {
    let mut runs = Vec::new();
    for pitch in 0..PITCHES {
        let mut step = 0;
        while step < PHRASE_STEPS {
            if roll.get(step, pitch) == 0 {
                step += 1;
                continue;
            }
            let start = step;
            while step < PHRASE_STEPS && roll.get(step, pitch) != 0 {
                step += 1;
            }
            runs.push([pitch, start, step - start]);
        }
    }
    runs.sort_by_key(|&[p, s, _]| (s, p));
    RollRepr::Runs { runs }
}

fn decode_roll(repr: RollRepr) -> Result<PhraseRoll, String> {
    match repr {
        RollRepr::Runs { runs } => {
            let mut roll = PhraseRoll::default();
            for [pitch, start, len] in runs {
                if pitch >= PITCHES || len == 0 || start + len > PHRASE_STEPS {
                    return Err(format!(
                        "run [{pitch}, {start}, {len}] outside the 64x128 grid"
                    ));
                }
                (start..start + len).for_each(|t| roll.set(t, pitch));
            }
            Ok(roll)
        }
        RollRepr::Dense(rows) => {
            if rows.len() != PHRASE_STEPS || rows.iter().any(|r| r.len() != PITCHES) {
                return Err("dense roll must be 64 rows of 128 cells".into());
            }
            if rows.iter().flatten().any(|&c| c > 1) {
                return Err("dense roll cells must be 0 or 1".into());
            }
            Ok(PhraseRoll::from_cells(&rows.concat()).expect("size checked"))
        }
    }
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<RankedQuery>, QueryFileError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |detail: String| QueryFileError::Corrupt {
            line: i + 1,
            detail,
        };
        let q: QueryRepr = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let source = decode_roll(q.source).map_err(corrupt)?;
        let candidates = q
            .candidates
            .into_iter()
            .map(decode_roll)
            .collect::<Result<Vec<_>, _>>()
            .map_err(corrupt)?;
        out.push(
            RankedQuery::new(q.id, source, candidates, q.positive_index).map_err(|source| {
                QueryFileError::Invalid {
                    line: i + 1,
                    source,
                }
            })?,
        );
    }
    if out.is_empty() {
        return Err(QueryFileError::Empty);
    }
    Ok(out)
}

pub fn write_queries(
    path: impl AsRef<Path>,
    queries: &[RankedQuery],
) -> Result<(), QueryFileError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for q in queries {
        let repr = QueryRepr {
            id: q.id.clone(),
            source: encode_roll(&q.source),
            candidates: q.candidates.iter().map(encode_roll).collect(),
            positive_index: q.positive_index,
        };
        serde_json::to_writer(&mut out, &repr).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// `count` queries over `pairs`: each takes one pair's source and target as
/// the positive, plus the targets of 49 other distinct pairs, with the
/// positive at a random position. Pairs are visited in a seeded shuffled
/// order, reshuffled each time the list is exhausted.
pub fn make_queries(
    pairs: &[PhrasePair],
    count: usize,
    seed: u64,
) -> Result<Vec<RankedQuery>, QueryFileError> {
    if pairs.len() < CANDIDATES {
        return Err(QueryFileError::TooFewPairs(pairs.len()));
    }
    let mut rng = stream_rng(sub_seed(seed, "queries"), 0);
    let mut order: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(count);
    for q in 0..count {
        if order.is_empty() {
            order = (0..pairs.len()).collect();
            order.shuffle(&mut rng);
            order.reverse();
        }
        let i = order.pop().expect("refilled");
        let mut candidates: Vec<PhraseRoll> =
            index::sample(&mut rng, pairs.len() - 1, CANDIDATES - 1)
                .into_iter()
                .map(|j| pairs[if j >= i { j + 1 } else { j }].target.clone())
                .collect();
        let positive_index = rng.random_range(0..CANDIDATES);
        candidates.insert(positive_index, pairs[i].target.clone());
        out.push(
            RankedQuery::new(
                format!("q{q}"),
                pairs[i].source.clone(),
                candidates,
                positive_index,
            )
            .expect("50 candidates with the positive in range"),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_round_trip() {
        let mut r = PhraseRoll::default();
        (3..7).for_each(|t| r.set(t, 60));
        r.set(0, 0);
        r.set(63, 127);
        let RollRepr::Runs { runs } = encode_roll(&r) else {
            panic!()
        };
        assert_eq!(runs, vec![[0, 0, 1], [60, 3, 4], [127, 63, 1]]);
        assert_eq!(decode_roll(RollRepr::Runs { runs }).unwrap(), r);
        assert!(decode_roll(RollRepr::Runs {
            runs: vec![[60, 62, 3]]
        })
        .is_err());
    }
}
