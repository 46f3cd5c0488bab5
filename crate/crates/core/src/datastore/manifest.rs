//! Line-delimited JSON manifest of generated songs.
//!
//! One JSON object per line. File paths are relative to the manifest's
//! directory. Rows are appended with a single write per line so a crash can
//! leave at most one partial trailing line, which [`ManifestWriter::open`]
//! drops when resuming.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowOutcome {
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub genre: String,
    pub style: String,
    pub mood: String,
    pub temperature: f64,
    pub song_index: u32,
    pub json_path: Option<String>,
    pub midi_path: Option<String>,
    pub note_count: usize,
    pub attempts: u32,
    pub outcome: RowOutcome,
    pub error: Option<String>,
    pub content_hash: Option<String>,
    pub seed: u64,
}

impl ManifestRow {
    pub fn is_success(&self) -> bool {
        self.outcome == RowOutcome::Success
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt manifest row at line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
    #[error("duplicate song id {id:?} at line {line}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    /// Directory the row paths are relative to.
    pub dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.dir.join(relative)
    }

    pub fn successes(&self) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(|r| r.is_success())
    }
}

/// Song id for a sweep position.
pub fn song_id(genre_slug: &str, style_slug: &str, index: u32) -> String {
    format!("{genre_slug}/{style_slug}/{index}")
}

/// SHA-256 over the JSON bytes followed by the MIDI bytes, hex encoded.
pub fn content_hash(json: &[u8], midi: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(json);
    h.update(midi);
    hex::encode(h.finalize())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(&line).map_err(|e| ManifestError::Corrupt {
            line: i + 1,
            detail: e.to_string(),
        })?;
        if !seen.insert(row.id.clone()) {
            return Err(ManifestError::DuplicateId {
                line: i + 1,
                id: row.id,
            });
        }
        rows.push(row);
    }
    Ok(Manifest {
        dir: manifest_dir(path),
        rows,
    })
}

pub fn manifest_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes a complete manifest, replacing any existing file.
pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<(), ManifestError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("rows serialize");
        out.push(b'\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub struct ManifestWriter {
    file: File,
}

impl ManifestWriter {
    /// Opens for appending, creating the file if needed and dropping a
    /// partial trailing line left by an interrupted run.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut text = Vec::new();
        file.read_to_end(&mut text)?;
        if !text.is_empty() && !text.ends_with(b"\n") {
            let keep = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok(Self { file })
    }

    pub fn append(&mut self, row: &ManifestRow) -> Result<(), ManifestError> {
        let mut line = serde_json::to_vec(row).expect("rows serialize");
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(id: &str) -> ManifestRow {
        ManifestRow {
            id: id.into(),
            genre: "pop".into(),
            style: "punk".into(),
            mood: "sad".into(),
            temperature: 0.64,
            song_index: 1,
            json_path: Some("a.song.json".into()),
            midi_path: Some("a.mid".into()),
            note_count: 10,
            attempts: 1,
            outcome: RowOutcome::Success,
            error: None,
            content_hash: Some("00".into()),
            seed: 7,
        }
    }

    #[test]
    fn write_read_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let mut w = ManifestWriter::open(&p).unwrap();
        for id in ["c", "a", "b"] {
            w.append(&row(id)).unwrap();
        }
        let m = read_manifest(&p).unwrap();
        assert_eq!(
            m.rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
            ["c", "a", "b"]
        );
        assert_eq!(m.rows[0], row("c"));
        assert_eq!(m.dir, dir.path());
    }

    #[test]
    fn duplicates_and_corruption_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        write_manifest(&p, &[row("a"), row("b"), row("a")]).unwrap();
        assert!(matches!(
            read_manifest(&p),
            Err(ManifestError::DuplicateId { line: 3, .. })
        ));

        let good = serde_json::to_string(&row("a")).unwrap();
        std::fs::write(
            &p,
            format!(
                "{good}\n{{\"id\": \n{}\n",
                serde_json::to_string(&row("b")).unwrap()
            ),
        )
        .unwrap();
        let err = read_manifest(&p).unwrap_err();
        assert!(matches!(err, ManifestError::Corrupt { line: 2, .. }));
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn reopening_drops_partial_tail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let good = serde_json::to_string(&row("a")).unwrap();
        std::fs::write(&p, format!("{good}\n{{\"id\": \"b\", \"gen")).unwrap();
        let mut w = ManifestWriter::open(&p).unwrap();
        w.append(&row("c")).unwrap();
        let m = read_manifest(&p).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[1].id, "c");
    }
}
