use super::{BackendError, CompletionRequest, LlmBackend};
use crate::codec::{serialize_song, CodecError};
use crate::music::{Song, Task, Taxonomy};

/// Sampling temperature for recognition requests.
pub const RECOGNITION_TEMPERATURE: f64 = 0.2;
const RECOGNITION_MAX_TOKENS: u32 = 256;

pub fn build_recognition_prompt(song: &Song, task: Task) -> Result<String, CodecError> {
    Ok(format!(
        "What {} is the song described in the following JSON for MIDI file?\n{}",
        task.name(),
        serialize_song(song)?
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recognition {
    /// Index into the task's label list.
    Matched(usize),
    Unmatched(String),
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Strict match: exactly one label may occur in the reply's final segment,
/// which is the text after the last "classification" (any case) or, failing
/// that, the last non-empty line. A label occurrence lying inside a longer
/// matched label ("rock" inside "rock hard") does not count.
pub fn match_label(reply: &str, labels: &[String]) -> Option<usize> {
    let lower = reply.to_lowercase();
    let segment = match lower.rfind("classification") {
        Some(i) => &lower[i + "classification".len()..],
        None => lower
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or(""),
    };
    let words = tokens(segment);
    let mut spans = Vec::new();
    for (li, label) in labels.iter().enumerate() {
        let lt = tokens(label);
        if lt.is_empty() || lt.len() > words.len() {
            continue;
        }
        for start in 0..=words.len() - lt.len() {
            if words[start..start + lt.len()] == lt[..] {
                spans.push((start, start + lt.len(), li));
            }
        }
    }
    let kept: Vec<usize> = spans
        .iter()
        .filter(|&&(s, e, _)| {
            !spans
                .iter()
                .any(|&(s2, e2, _)| s2 <= s && e <= e2 && e2 - s2 > e - s)
        })
        .map(|&(_, _, l)| l)
        .collect();
    match kept.split_first() {
        Some((&first, rest)) if rest.iter().all(|&l| l == first) => Some(first),
        _ => None,
    }
}

pub fn zero_shot_classify(
    backend: &dyn LlmBackend,
    song: &Song,
    task: Task,
    taxonomy: &Taxonomy,
    seed: Option<u64>,
) -> Result<Recognition, BackendError> {
    let prompt = build_recognition_prompt(song, task)
        .map_err(|e| BackendError::Config(format!("song cannot be encoded: {e}")))?;
    let req = CompletionRequest {
        prompt,
        temperature: RECOGNITION_TEMPERATURE,
        max_tokens: RECOGNITION_MAX_TOKENS,
        seed,
    };
    let reply = backend.complete(&req)?;
    Ok(match match_label(&reply, taxonomy.labels(task)) {
        Some(i) => Recognition::Matched(i),
        None => Recognition::Unmatched(reply),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn strict_matching() {
        let l = labels(&["pop", "folk", "rock", "rock hard", "new age"]);
        assert_eq!(match_label("Thinking...\nClassification: Pop", &l), Some(0));
        assert_eq!(match_label("Classification: Pop / Folk", &l), None);
        assert_eq!(match_label("It sounds like jazz.", &l), None);
        assert_eq!(
            match_label("Folk elements, maybe pop.\nCLASSIFICATION: new   AGE.", &l),
            Some(4)
        );
        assert_eq!(match_label("Classification: Rock Hard", &l), Some(3));
        assert_eq!(match_label("Rock, then rock hard", &l), None);
        assert_eq!(match_label("Pop or folk?\nI would say: pop", &l), Some(0));
        assert_eq!(
            match_label("Classification: pop, definitely pop", &l),
            Some(0)
        );
        assert_eq!(match_label("Classification: popular", &l), None);
        assert_eq!(match_label("", &l), None);
    }
}
