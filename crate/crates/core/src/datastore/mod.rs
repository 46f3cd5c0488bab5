//! Dataset persistence: the manifest, splits, statistics, label ingestion
//! and ranking query files.

pub mod labels;
pub mod manifest;
pub mod queries;
pub mod split;
pub mod stats;

use crate::codec::{parse_song, CodecError};
use crate::music::{song_note_count, Song, SongMeta, SongSource, Taxonomy, TaxonomyError};
use manifest::{content_hash, Manifest, ManifestRow};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("row {0} has no song file")]
    NotASuccess(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Codec { path: String, source: CodecError },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Reads and validates the JSON song of a successful row, with labels
/// resolved through `taxonomy`.
pub fn load_song(
    manifest: &Manifest,
    row: &ManifestRow,
    taxonomy: &Taxonomy,
) -> Result<Song, LoadError> {
    let rel = row
        .json_path
        .as_deref()
        .ok_or_else(|| LoadError::NotASuccess(row.id.clone()))?;
    let path = manifest.resolve(rel);
    let text = std::fs::read_to_string(&path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let meta = SongMeta {
        genre: taxonomy.genre_index(&row.genre)?,
        style: taxonomy.style_index(&row.style)?,
        mood: taxonomy.mood_index(&row.mood)?,
        temperature: row.temperature,
        song_index: row.song_index,
        source: SongSource::Ingested,
    };
    parse_song(&text, meta).map_err(|source| LoadError::Codec {
        path: path.display().to_string(),
        source,
    })
}

/// Every song of the manifest's successful rows, in row order.
pub fn load_songs(manifest: &Manifest, taxonomy: &Taxonomy) -> Result<Vec<Song>, LoadError> {
    manifest
        .successes()
        .map(|r| load_song(manifest, r, taxonomy))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub checked: usize,
    /// `(song id, problem)` pairs.
    pub problems: Vec<(String, String)>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks that every successful row's files exist, hash to the recorded
/// value, parse and validate, and hold the recorded note count.
pub fn audit(manifest: &Manifest, taxonomy: &Taxonomy) -> AuditReport {
    let mut report = AuditReport::default();
    for row in manifest.successes() {
        report.checked += 1;
        let mut problem = |p: String| report.problems.push((row.id.clone(), p));
        let (Some(j), Some(m)) = (&row.json_path, &row.midi_path) else {
            problem("success row without file paths".into());
            continue;
        };
        let (json, midi) = match (
            std::fs::read(manifest.resolve(j)),
            std::fs::read(manifest.resolve(m)),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                problem(format!("unreadable file: {e}"));
                continue;
            }
        };
        if row.content_hash.as_deref() != Some(content_hash(&json, &midi).as_str()) {
            problem("content hash mismatch".into());
        }
        match load_song(manifest, row, taxonomy) {
            Ok(song) if song_note_count(&song) != row.note_count => problem(format!(
                "note count {} but manifest says {}",
                song_note_count(&song),
                row.note_count
            )),
            Ok(_) => {}
            Err(e) => problem(e.to_string()),
        }
    }
    report
}
