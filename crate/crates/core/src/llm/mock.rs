//! Offline rule-based backend.
//!
//! Songs carry a fixed signature per label so that classes are separable:
//! - genre `g`: bass pedal on pitch `20 + 4g`, melody tonic `60 + 5g mod 12`
//! - style `s`: kick pattern `s / 5`, snare pattern `s % 5`, chord root
//!   `48 + s mod 12` and progression `s / 12`
//!
//! The melody's second half repeats the first with temperature-scaled
//! jitter. Everything else random is drawn from a generator seeded by a hash
//! of the request, so the reply is a pure function of (prompt, temperature,
//! request seed, backend seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::prompt::parse_generation_prompt;
use super::{BackendError, CompletionRequest, LlmBackend};
use crate::codec::{extract_json_payload, parse_song, serialize_song};
use crate::music::{
    NoteEvent, Song, SongMeta, SongSource, Taxonomy, TrackRole, HIHAT, KICK, SNARE,
};

/// One 4/4 measure; the 7680-tick song span holds four of them.
const MEASURE: i64 = 1920;
const EIGHTH: i64 = 240;
const MEASURES: i64 = 4;

/// Eighth-note masks within a measure, most significant bit first.
const KICK_PATTERNS: [u8; 5] = [
    0b1000_1000,
    0b1000_0000,
    0b1010_0010,
    0b1001_0010,
    0b1100_1000,
];
const SNARE_PATTERNS: [u8; 5] = [
    0b0010_0010,
    0b0000_1000,
    0b0010_0011,
    0b0101_0101,
    0b0000_0010,
];
/// Chord roots per measure, in semitones above the style root.
const PROGRESSIONS: [[i64; 4]; 3] = [[0, 5, 7, 0], [0, 9, 5, 7], [0, 0, 7, 7]];
const MAJOR: [i64; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR: [i64; 7] = [0, 2, 3, 5, 7, 8, 10];
/// Base velocity per mood index.
const MOOD_VELOCITY: [i64; 5] = [92, 56, 110, 50, 72];

pub fn bass_pitch(genre: usize) -> i64 {
    20 + 4 * genre as i64
}

pub fn melody_tonic(genre: usize) -> i64 {
    60 + (5 * genre as i64) % 12
}

#[derive(Clone, Debug)]
pub struct MockBackend {
    taxonomy: Taxonomy,
    seed: u64,
}

impl MockBackend {
    pub fn new(taxonomy: Taxonomy, seed: u64) -> Self {
        Self { taxonomy, seed }
    }

    fn rng(&self, req: &CompletionRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(req.prompt.as_bytes());
        h.update(req.temperature.to_bits().to_le_bytes());
        h.update(self.seed.to_le_bytes());
        match req.seed {
            Some(s) => {
                h.update([1]);
                h.update(s.to_le_bytes());
            }
            None => h.update([0]),
        }
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// A song for the given labels; exposed for tests and fixtures.
    pub fn compose(
        &self,
        genre: usize,
        style: usize,
        mood: usize,
        temperature: f64,
        rng: &mut impl Rng,
    ) -> Song {
        let mut song = Song::empty(SongMeta {
            genre,
            style,
            mood,
            temperature,
            song_index: 0,
            source: SongSource::MockGenerated,
        });
        let vel = |rng: &mut dyn rand::RngCore, base: i64| {
            (base + rng.random_range(-8..=8)).clamp(1, 127)
        };
        let base_vel = MOOD_VELOCITY[mood % MOOD_VELOCITY.len()];

        let pedal = bass_pitch(genre);
        for m in 0..MEASURES {
            for beat in 0..4 {
                let pitch = if beat == 2 && rng.random_bool((0.15 * temperature).min(1.0)) {
                    pedal + 7
                } else {
                    pedal
                };
                let v = vel(rng, base_vel);
                song.track_mut(TrackRole::Bass).push(NoteEvent::new(
                    pitch,
                    480,
                    v,
                    m * MEASURE + beat * 480,
                ));
            }
        }

        let root = 48 + (style % 12) as i64;
        let prog = PROGRESSIONS[style / 12];
        for m in 0..MEASURES {
            let r = root + prog[(m % 4) as usize];
            for half in 0..2 {
                for iv in [0, 4, 7] {
                    let v = vel(rng, base_vel - 10);
                    song.track_mut(TrackRole::Chords).push(NoteEvent::new(
                        r + iv,
                        960,
                        v,
                        m * MEASURE + half * 960,
                    ));
                }
            }
        }

        let (kick, snare) = (KICK_PATTERNS[style / 5], SNARE_PATTERNS[style % 5]);
        for m in 0..MEASURES {
            for step in 0..8 {
                let t = m * MEASURE + step * EIGHTH;
                let bit = 0x80 >> step;
                if kick & bit != 0 {
                    let v = vel(rng, base_vel + 10);
                    song.track_mut(TrackRole::Rhythm)
                        .push(NoteEvent::new(KICK, EIGHTH, v, t));
                }
                if snare & bit != 0 {
                    let v = vel(rng, base_vel + 5);
                    song.track_mut(TrackRole::Rhythm)
                        .push(NoteEvent::new(SNARE, EIGHTH, v, t));
                }
                if !rng.random_bool((0.1 * temperature).min(1.0)) {
                    let v = vel(rng, base_vel - 20);
                    song.track_mut(TrackRole::Rhythm)
                        .push(NoteEvent::new(HIHAT, EIGHTH, v, t));
                }
            }
        }

        let scale = if matches!(mood, 1 | 4) { MINOR } else { MAJOR };
        let tonic = melody_tonic(genre);
        let pitch_of =
            |degree: i64| tonic + 12 * degree.div_euclid(7) + scale[degree.rem_euclid(7) as usize];
        let mut phrase = Vec::new();
        let mut degree = rng.random_range(0..5i64);
        let mut t = 0;
        while t < MEASURES / 2 * MEASURE {
            let room = MEASURES / 2 * MEASURE - t;
            let fits: Vec<i64> = [240, 480, 960].into_iter().filter(|&d| d <= room).collect();
            let dur = fits[rng.random_range(0..fits.len())];
            phrase.push((degree, dur, t));
            degree = (degree + rng.random_range(-2..=2i64)).clamp(-3, 9);
            t += dur;
        }
        let jitter = (0.25 * temperature).min(1.0);
        for &(d, dur, t) in &phrase {
            let v = vel(rng, base_vel);
            song.track_mut(TrackRole::Melody)
                .push(NoteEvent::new(pitch_of(d), dur, v, t));
        }
        for &(d, dur, t) in &phrase {
            let d = if rng.random_bool(jitter) {
                d + if rng.random_bool(0.5) { 1 } else { -1 }
            } else {
                d
            };
            let v = vel(rng, base_vel);
            song.track_mut(TrackRole::Melody).push(NoteEvent::new(
                pitch_of(d),
                dur,
                v,
                t + MEASURES / 2 * MEASURE,
            ));
        }
        song.sort_tracks();
        song
    }

    fn recognize(&self, prompt: &str) -> String {
        let style_task = prompt.starts_with("What style");
        let label = extract_json_payload(prompt)
            .ok()
            .and_then(|j| parse_song(j, SongMeta::default()).ok())
            .and_then(|s| {
                if style_task {
                    decode_style(&s).map(|i| &self.taxonomy.styles[i])
                } else {
                    decode_genre(&s).map(|i| &self.taxonomy.genres[i])
                }
            });
        match label {
            Some(l) => format!(
                "The bass register and the drum groove are characteristic.\nClassification: {l}"
            ),
            None => "I cannot tell from this material.".to_string(),
        }
    }
}

/// Inverts the genre signature: the most frequent bass pitch.
pub fn decode_genre(song: &Song) -> Option<usize> {
    let mut counts = [0usize; 128];
    for n in song.track(TrackRole::Bass) {
        counts[n.pitch as usize] += 1;
    }
    let (p, _) = counts.iter().enumerate().rev().max_by_key(|&(_, c)| *c)?;
    let p = p as i64;
    ((p - 20) % 4 == 0 && (20..=68).contains(&p)).then(|| ((p - 20) / 4) as usize)
}

/// Inverts the style signature: kick and snare masks of the first measure.
pub fn decode_style(song: &Song) -> Option<usize> {
    let mask = |pitch| {
        song.track(TrackRole::Rhythm)
            .iter()
            .filter(|n| n.pitch == pitch && n.start < MEASURE && n.start % EIGHTH == 0)
            .fold(0u8, |m, n| m | (0x80 >> (n.start / EIGHTH)))
    };
    let k = KICK_PATTERNS.iter().position(|&p| p == mask(KICK))?;
    let s = SNARE_PATTERNS.iter().position(|&p| p == mask(SNARE))?;
    Some(k * 5 + s)
}

impl LlmBackend for MockBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        if req.prompt.starts_with("What genre") || req.prompt.starts_with("What style") {
            return Ok(self.recognize(&req.prompt));
        }
        let Some(p) = parse_generation_prompt(&req.prompt, &self.taxonomy) else {
            return Ok("I can only compose songs from a composition request.".into());
        };
        let mut rng = self.rng(req);
        let song = self.compose(p.genre, p.style, p.mood, req.temperature, &mut rng);
        let json = serialize_song(&song).expect("mock songs are valid");
        Ok(match rng.random_range(0..3) {
            0 => json,
            1 => format!("```json\n{json}\n```"),
            _ => format!("Here is the song you asked for:\n{json}\nEnjoy!"),
        })
    }

    fn source(&self) -> SongSource {
        SongSource::MockGenerated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::build_generation_prompt;
    use crate::music::validate_song;

    fn request(
        t: &Taxonomy,
        g: usize,
        s: usize,
        m: usize,
        temp: f64,
        seed: u64,
    ) -> CompletionRequest {
        let p = build_generation_prompt(&t.genres[g], &t.styles[s], &t.moods[m], t).unwrap();
        CompletionRequest::generation(p, temp, seed)
    }

    #[test]
    fn replies_are_pure_and_valid() {
        let t = Taxonomy::default();
        let b = MockBackend::new(t.clone(), 3);
        for g in 0..13 {
            for s in 0..25 {
                let req = request(&t, g, s, (g + s) % 5, 0.96, 11);
                let a = b.complete(&req).unwrap();
                assert_eq!(a, b.complete(&req).unwrap());
                let song =
                    parse_song(extract_json_payload(&a).unwrap(), SongMeta::default()).unwrap();
                assert!(validate_song(&song).is_ok());
                assert_eq!(decode_genre(&song), Some(g));
                assert_eq!(decode_style(&song), Some(s));
            }
        }
    }

    #[test]
    fn genres_have_distinct_templates() {
        let t = Taxonomy::default();
        let b = MockBackend::new(t.clone(), 0);
        let pitches = |g| {
            let r = b.complete(&request(&t, g, 0, 0, 0.6, 0)).unwrap();
            let s = parse_song(extract_json_payload(&r).unwrap(), SongMeta::default()).unwrap();
            s.track(TrackRole::Bass)
                .iter()
                .map(|n| n.pitch)
                .min()
                .unwrap()
        };
        assert_ne!(pitches(0), pitches(1));
    }

    #[test]
    fn request_seed_changes_melody() {
        let t = Taxonomy::default();
        let b = MockBackend::new(t.clone(), 0);
        assert_ne!(
            b.complete(&request(&t, 2, 3, 1, 0.6, 1)).unwrap(),
            b.complete(&request(&t, 2, 3, 1, 0.6, 2)).unwrap()
        );
    }
}
