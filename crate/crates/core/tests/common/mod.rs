#![allow(dead_code)]

use midistring::music::{NoteEvent, Song, SongMeta, TrackRole, DRUM_PITCHES, DURATIONS, MAX_START};
use rand::Rng;

/// A random song satisfying every validation rule: 1 to `max_notes` notes per
/// track, any pitch (drum pitches on the rhythm track), any velocity, starts
/// anywhere in the song span.
pub fn random_song(rng: &mut impl Rng, max_notes: usize) -> Song {
    let mut song = Song::empty(SongMeta::default());
    for role in TrackRole::ALL {
        let n = rng.random_range(1..=max_notes);
        let notes = song.track_mut(role);
        for _ in 0..n {
            let pitch = if role == TrackRole::Rhythm {
                DRUM_PITCHES[rng.random_range(0..DRUM_PITCHES.len())]
            } else {
                rng.random_range(0..=127)
            };
            let duration = DURATIONS[rng.random_range(0..DURATIONS.len())];
            notes.push(NoteEvent::new(
                pitch,
                duration,
                rng.random_range(0..=127),
                rng.random_range(0..=MAX_START),
            ));
        }
    }
    song.sort_tracks();
    song
}

/// Like [`random_song`] with starts on the eighth-note grid.
pub fn random_grid_song(rng: &mut impl Rng, max_notes: usize) -> Song {
    let mut song = random_song(rng, max_notes);
    for notes in song.tracks.values_mut() {
        for n in notes.iter_mut() {
            n.start = n.start / 240 * 240;
        }
    }
    song.sort_tracks();
    song
}

/// Weighted F1 from raw counts: F1 = 2·tp / (predicted + actual), zero when
/// a class is neither predicted nor present, weighted by true support.
pub fn brute_weighted_f1(y_true: &[usize], y_pred: &[usize], classes: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..classes {
        let tp = y_true
            .iter()
            .zip(y_pred)
            .filter(|&(&t, &p)| t == c && p == c)
            .count();
        let predicted = y_pred.iter().filter(|&&p| p == c).count();
        let actual = y_true.iter().filter(|&&t| t == c).count();
        if predicted + actual > 0 {
            total += actual as f64 * 2.0 * tp as f64 / (predicted + actual) as f64;
        }
    }
    total / y_true.len() as f64
}

/// 1-based rank of `positive` under descending scores, lower index first on
/// ties, by counting the candidates placed ahead of it.
pub fn brute_rank(scores: &[f64], positive: usize) -> usize {
    let s = scores[positive];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x > s || (x == s && j < positive))
        .count()
}

/// Mean of 1/rank, and the fraction of ranks within each `k`.
pub fn brute_map_hits(ranks: &[usize], ks: &[usize]) -> (f64, Vec<f64>) {
    let n = ranks.len() as f64;
    let map = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits = ks
        .iter()
        .map(|&k| ranks.iter().filter(|&&r| r <= k).count() as f64 / n)
        .collect();
    (map, hits)
}
