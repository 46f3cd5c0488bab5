//! Song domain types, the label taxonomy and note/song validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const TICKS_PER_QUARTER: i64 = 480;
/// Eight bars of 4/4.
pub const MAX_START: i64 = 7680;
pub const DURATIONS: [i64; 3] = [240, 480, 960];
pub const KICK: i64 = 35;
pub const SNARE: i64 = 38;
pub const HIHAT: i64 = 42;
pub const DRUM_PITCHES: [i64; 3] = [KICK, SNARE, HIHAT];

pub const GENRE_COUNT: usize = 13;
pub const STYLE_COUNT: usize = 25;
pub const MOOD_COUNT: usize = 5;

/// One note as the tuple `(pitch, duration, velocity, start)`.
///
/// Fields are wide signed integers so that out-of-range input survives parsing
/// and is reported by [`validate_note`] instead of failing a conversion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoteEvent {
    pub pitch: i64,
    pub duration: i64,
    pub velocity: i64,
    pub start: i64,
}

impl NoteEvent {
    pub const fn new(pitch: i64, duration: i64, velocity: i64, start: i64) -> Self {
        Self {
            pitch,
            duration,
            velocity,
            start,
        }
    }

    /// Canonical order within a track.
    pub fn sort_key(&self) -> (i64, i64, i64, i64) {
        (self.start, self.pitch, self.duration, self.velocity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackRole {
    Melody,
    Chords,
    Bass,
    Rhythm,
}

impl TrackRole {
    pub const ALL: [TrackRole; 4] = [
        TrackRole::Melody,
        TrackRole::Chords,
        TrackRole::Bass,
        TrackRole::Rhythm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrackRole::Melody => "melody",
            TrackRole::Chords => "chords",
            TrackRole::Bass => "bass",
            TrackRole::Rhythm => "rhythm",
        }
    }

    /// Position in [`TrackRole::ALL`]; also the piano-roll channel.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TrackRole::ALL.into_iter().find(|r| r.name() == name)
    }
}

impl fmt::Display for TrackRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SongSource {
    LlmGenerated,
    MockGenerated,
    #[default]
    Ingested,
}

/// Generation metadata. Label fields are indices into the active [`Taxonomy`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SongMeta {
    pub genre: usize,
    pub style: usize,
    pub mood: usize,
    pub temperature: f64,
    pub song_index: u32,
    pub source: SongSource,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Song {
    pub tracks: BTreeMap<TrackRole, Vec<NoteEvent>>,
    pub meta: SongMeta,
}

impl Song {
    /// A song with all four roles present and empty.
    pub fn empty(meta: SongMeta) -> Self {
        Self {
            tracks: TrackRole::ALL.iter().map(|&r| (r, Vec::new())).collect(),
            meta,
        }
    }

    pub fn track(&self, role: TrackRole) -> &[NoteEvent] {
        self.tracks.get(&role).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn track_mut(&mut self, role: TrackRole) -> &mut Vec<NoteEvent> {
        self.tracks.entry(role).or_default()
    }

    /// Sorts every track into canonical order.
    pub fn sort_tracks(&mut self) {
        for notes in self.tracks.values_mut() {
            notes.sort_by_key(NoteEvent::sort_key);
        }
    }

    /// True when the note content of both songs is identical; metadata is ignored.
    pub fn same_notes(&self, other: &Song) -> bool {
        self.tracks == other.tracks
    }
}

pub fn song_note_count(song: &Song) -> usize {
    song.tracks.values().map(Vec::len).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationKind {
    MissingTrack,
    EmptyTrack,
    PitchOutOfRange,
    InvalidDuration,
    VelocityOutOfRange,
    StartOutOfRange,
    InvalidDrumPitch,
    UnsortedTrack,
}

impl ValidationKind {
    pub const ALL: [ValidationKind; 8] = [
        ValidationKind::MissingTrack,
        ValidationKind::EmptyTrack,
        ValidationKind::PitchOutOfRange,
        ValidationKind::InvalidDuration,
        ValidationKind::VelocityOutOfRange,
        ValidationKind::StartOutOfRange,
        ValidationKind::InvalidDrumPitch,
        ValidationKind::UnsortedTrack,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?}{}{}: {detail}", role.map(|r| format!(" in {r}")).unwrap_or_default(), note_index.map(|i| format!(" at note {i}")).unwrap_or_default())]
pub struct ValidationError {
    pub kind: ValidationKind,
    pub role: Option<TrackRole>,
    pub note_index: Option<usize>,
    pub detail: String,
}

impl ValidationError {
    fn new(kind: ValidationKind, detail: String) -> Self {
        Self {
            kind,
            role: None,
            note_index: None,
            detail,
        }
    }

    fn at(mut self, role: TrackRole, index: usize) -> Self {
        self.role = Some(role);
        self.note_index = Some(index);
        self
    }
}

/// Checks one note; reports the first violated constraint.
pub fn validate_note(note: &NoteEvent, is_rhythm: bool) -> Result<(), ValidationError> {
    use ValidationKind::*;
    if !(0..=127).contains(&note.pitch) {
        return Err(ValidationError::new(
            PitchOutOfRange,
            format!("pitch {} outside 0..=127", note.pitch),
        ));
    }
    if is_rhythm && !DRUM_PITCHES.contains(&note.pitch) {
        return Err(ValidationError::new(
            InvalidDrumPitch,
            format!("drum pitch {} not in {DRUM_PITCHES:?}", note.pitch),
        ));
    }
    if !DURATIONS.contains(&note.duration) {
        return Err(ValidationError::new(
            InvalidDuration,
            format!("duration {} not in {DURATIONS:?}", note.duration),
        ));
    }
    if !(0..=127).contains(&note.velocity) {
        return Err(ValidationError::new(
            VelocityOutOfRange,
            format!("velocity {} outside 0..=127", note.velocity),
        ));
    }
    if !(0..=MAX_START).contains(&note.start) {
        return Err(ValidationError::new(
            StartOutOfRange,
            format!("start {} outside 0..={MAX_START}", note.start),
        ));
    }
    Ok(())
}

/// Checks every song invariant and reports all violations in role order.
pub fn validate_song(song: &Song) -> Result<(), Vec<ValidationError>> {
    let mut errors = Vec::new();
    for role in TrackRole::ALL {
        let Some(notes) = song.tracks.get(&role) else {
            let mut e =
                ValidationError::new(ValidationKind::MissingTrack, format!("no {role} track"));
            e.role = Some(role);
            errors.push(e);
            continue;
        };
        if notes.is_empty() {
            let mut e = ValidationError::new(
                ValidationKind::EmptyTrack,
                format!("{role} track has no notes"),
            );
            e.role = Some(role);
            errors.push(e);
            continue;
        }
        let rhythm = role == TrackRole::Rhythm;
        for (i, n) in notes.iter().enumerate() {
            if let Err(e) = validate_note(n, rhythm) {
                errors.push(e.at(role, i));
            }
        }
        if let Some(i) = notes
            .windows(2)
            .position(|w| (w[0].start, w[0].pitch) > (w[1].start, w[1].pitch))
        {
            errors.push(
                ValidationError::new(
                    ValidationKind::UnsortedTrack,
                    format!("{role} notes not ordered by (start, pitch)"),
                )
                .at(role, i + 1),
            );
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse taxonomy: {0}")]
    Parse(String),
    #[error("taxonomy lists {found} {key}, expected {expected}")]
    Cardinality {
        key: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("duplicate {key} label {label:?}")]
    Duplicate { key: &'static str, label: String },
    #[error("empty {key} label")]
    EmptyLabel { key: &'static str },
    #[error("unknown {key} label {label:?}")]
    Unknown { key: &'static str, label: String },
}

/// Trim, lowercase and collapse internal whitespace.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Filesystem-friendly form of a label.
pub fn label_slug(label: &str) -> String {
    normalize_label(label).replace(' ', "-")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Taxonomy {
    pub genres: Vec<String>,
    pub styles: Vec<String>,
    pub moods: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    genres: Vec<String>,
    styles: Vec<String>,
    moods: Vec<String>,
}

const DEFAULT_TAXONOMY: &str = include_str!("../taxonomy.toml");

impl Default for Taxonomy {
    /// The bundled reconstruction (see `taxonomy.toml`).
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TAXONOMY).expect("bundled taxonomy is valid")
    }
}

impl Taxonomy {
    pub fn new(
        genres: Vec<String>,
        styles: Vec<String>,
        moods: Vec<String>,
    ) -> Result<Self, TaxonomyError> {
        Ok(Self {
            genres: checked_labels("genres", genres, GENRE_COUNT)?,
            styles: checked_labels("styles", styles, STYLE_COUNT)?,
            moods: checked_labels("moods", moods, MOOD_COUNT)?,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TaxonomyError> {
        let f: TaxonomyFile =
            toml::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        Self::new(f.genres, f.styles, f.moods)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn genre_index(&self, label: &str) -> Result<usize, TaxonomyError> {
        find("genre", &self.genres, label)
    }

    pub fn style_index(&self, label: &str) -> Result<usize, TaxonomyError> {
        find("style", &self.styles, label)
    }

    pub fn mood_index(&self, label: &str) -> Result<usize, TaxonomyError> {
        find("mood", &self.moods, label)
    }

    pub fn labels(&self, task: Task) -> &[String] {
        match task {
            Task::Genre => &self.genres,
            Task::Style => &self.styles,
        }
    }

    pub fn label_index(&self, task: Task, label: &str) -> Result<usize, TaxonomyError> {
        match task {
            Task::Genre => self.genre_index(label),
            Task::Style => self.style_index(label),
        }
    }
}

fn checked_labels(
    key: &'static str,
    labels: Vec<String>,
    expected: usize,
) -> Result<Vec<String>, TaxonomyError> {
    if labels.len() != expected {
        return Err(TaxonomyError::Cardinality {
            key,
            expected,
            found: labels.len(),
        });
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(labels.len());
    for l in labels {
        let n = normalize_label(&l);
        if n.is_empty() {
            return Err(TaxonomyError::EmptyLabel { key });
        }
        if !seen.insert(n.clone()) {
            return Err(TaxonomyError::Duplicate { key, label: n });
        }
        out.push(n);
    }
    Ok(out)
}

fn find(key: &'static str, labels: &[String], label: &str) -> Result<usize, TaxonomyError> {
    let n = normalize_label(label);
    labels
        .iter()
        .position(|l| *l == n)
        .ok_or(TaxonomyError::Unknown {
            key,
            label: label.to_string(),
        })
}

/// Classification target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Genre,
    Style,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Genre => "genre",
            Task::Style => "style",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
