use std::sync::LazyLock;

use regex::Regex;

use crate::music::{Taxonomy, TaxonomyError};

/// `0.6 + 0.04 * (index mod 10)`, computed in hundredths so the values are
/// the nearest doubles to 0.60, 0.64, ..., 0.96.
pub fn temperature_for_index(index: u32) -> f64 {
    f64::from(60 + 4 * (index % 10)) / 100.0
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Composition request for one genre, style and mood. Labels are resolved
/// (and normalized) through the taxonomy.
pub fn build_generation_prompt(
    genre: &str,
    style: &str,
    mood: &str,
    taxonomy: &Taxonomy,
) -> Result<String, TaxonomyError> {
    let genre = &taxonomy.genres[taxonomy.genre_index(genre)?];
    let style = &taxonomy.styles[taxonomy.style_index(style)?];
    let mood = &taxonomy.moods[taxonomy.mood_index(mood)?];
    Ok(format!(
        "Compose an 8-bar {genre} song in {style} manner with {art} {mood} mood.\n\
         \n\
         The song has four tracks: melody, chords, bass and rhythm. Every track is a list of notes and every note \
         is a tuple [pitch, duration, velocity, start_time] in exactly that order.\n\
         - pitch: integer MIDI note number from 0 to 127\n\
         - duration: 240 (eighth note), 480 (quarter note) or 960 (half note) ticks\n\
         - velocity: integer from 0 to 127\n\
         - start_time: integer tick from 0 to 7680 covering the whole song; a quarter note is 480 ticks\n\
         - the rhythm track is a drum part and uses only pitch 35 (kick), 38 (snare) and 42 (hi-hat)\n\
         - every track contains at least one note\n\
         \n\
         Reply with a pure JSON string as output: one object with the keys \"melody\", \"chords\", \"bass\" and \
         \"rhythm\", each mapping to its list of tuples, and nothing else.",
        art = article(mood),
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationPrompt {
    pub genre: usize,
    pub style: usize,
    pub mood: usize,
}

static PROMPT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"Compose an 8-bar (.+?) song in (.+?) manner with an? (.+?) mood\.").unwrap()
});

/// Recovers the labels of a prompt built by [`build_generation_prompt`].
pub fn parse_generation_prompt(prompt: &str, taxonomy: &Taxonomy) -> Option<GenerationPrompt> {
    let c = PROMPT_RE.captures(prompt)?;
    Some(GenerationPrompt {
        genre: taxonomy.genre_index(&c[1]).ok()?,
        style: taxonomy.style_index(&c[2]).ok()?,
        mood: taxonomy.mood_index(&c[3]).ok()?,
    })
}
