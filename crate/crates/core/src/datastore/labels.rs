//! Labeled evaluation sets from a CSV of MIDI paths and labels.
//!
//! The CSV needs a header row. The file column is the first of `path`,
//! `midi_path`, `file`, `midi` and the label column the first of `label`,
//! the task name (`genre` or `style`), `class`. Relative paths resolve
//! against the CSV's directory.

use std::path::{Path, PathBuf};

use crate::midi::midi_to_song;
use crate::music::{Song, Task, Taxonomy};
use crate::pianoroll::{song_to_roll, RollTensor};

const FILE_COLUMNS: [&str; 4] = ["path", "midi_path", "file", "midi"];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("no file column (one of {FILE_COLUMNS:?}) in the header")]
    MissingFileColumn,
    #[error("no label column in the header")]
    MissingLabelColumn,
    #[error("no usable rows ({0} skipped)")]
    Empty(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledItem {
    pub path: PathBuf,
    pub label: usize,
    pub song: Song,
    pub roll: RollTensor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skipped {
    /// 1-based CSV line, header included.
    pub line: usize,
    pub path: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledSet {
    pub items: Vec<LabeledItem>,
    pub skipped: Vec<Skipped>,
}

impl LabeledSet {
    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn rolls(&self) -> Vec<&RollTensor> {
        self.items.iter().map(|i| &i.roll).collect()
    }
}

pub fn ingest_labels(
    csv_path: &Path,
    taxonomy: &Taxonomy,
    task: Task,
) -> Result<LabeledSet, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: csv_path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_lowercase)
        .collect();
    let find = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| header.iter().position(|h| h == n))
    };
    let file_col = find(&FILE_COLUMNS).ok_or(IngestError::MissingFileColumn)?;
    let label_col =
        find(&["label", task.name(), "class"]).ok_or(IngestError::MissingLabelColumn)?;
    let base = csv_path.parent().unwrap_or(Path::new("."));

    let mut set = LabeledSet::default();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(csv_err)?;
        let path = record.get(file_col).unwrap_or("").to_string();
        let mut skip = |reason: String| {
            set.skipped.push(Skipped {
                line,
                path: path.clone(),
                reason,
            })
        };
        let label = match taxonomy.label_index(task, record.get(label_col).unwrap_or("")) {
            Ok(l) => l,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let full = base.join(&path);
        let bytes = match std::fs::read(&full) {
            Ok(b) => b,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        match midi_to_song(&bytes, None) {
            Ok((song, _)) => set.items.push(LabeledItem {
                path: full,
                label,
                roll: song_to_roll(&song),
                song,
            }),
            Err(e) => skip(e.to_string()),
        }
    }
    for s in &set.skipped {
        log::warn!(
            "{}:{}: skipped {:?}: {}",
            csv_path.display(),
            s.line,
            s.path,
            s.reason
        );
    }
    if set.items.is_empty() {
        return Err(IngestError::Empty(set.skipped.len()));
    }
    Ok(set)
}
