//! Dataset statistics aggregated from a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use crate::music::{normalize_label, Taxonomy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Successful songs.
    pub files: usize,
    pub failures: usize,
    pub total_notes: usize,
    /// Label counts in taxonomy order, then any labels outside it.
    pub per_genre: Vec<(String, usize)>,
    pub per_style: Vec<(String, usize)>,
    pub per_mood: Vec<(String, usize)>,
    /// Keyed by temperature printed with two decimals.
    pub temperatures: Vec<(String, usize)>,
}

fn ordered(counts: BTreeMap<String, usize>, order: &[String]) -> Vec<(String, usize)> {
    let mut counts = counts;
    let mut out: Vec<(String, usize)> = order
        .iter()
        .map(|l| (l.clone(), counts.remove(&normalize_label(l)).unwrap_or(0)))
        .collect();
    out.extend(counts);
    out
}

/// Counts over successful rows only; failures are tallied separately.
pub fn dataset_stats(manifest: &Manifest, taxonomy: &Taxonomy) -> DatasetStats {
    let (mut genres, mut styles, mut moods, mut temps) = (
        BTreeMap::new(),
        BTreeMap::new(),
        BTreeMap::new(),
        BTreeMap::new(),
    );
    let mut total_notes = 0;
    for r in manifest.successes() {
        *genres.entry(normalize_label(&r.genre)).or_insert(0) += 1;
        *styles.entry(normalize_label(&r.style)).or_insert(0) += 1;
        *moods.entry(normalize_label(&r.mood)).or_insert(0) += 1;
        *temps.entry(format!("{:.2}", r.temperature)).or_insert(0) += 1;
        total_notes += r.note_count;
    }
    DatasetStats {
        files: manifest.successes().count(),
        failures: manifest.rows.len() - manifest.successes().count(),
        total_notes,
        per_genre: ordered(genres, &taxonomy.genres),
        per_style: ordered(styles, &taxonomy.styles),
        per_mood: ordered(moods, &taxonomy.moods),
        temperatures: temps.into_iter().collect(),
    }
}

fn spread(counts: &[(String, usize)]) -> String {
    let nonzero = counts.iter().filter(|c| c.1 > 0).count();
    let min = counts.iter().map(|c| c.1).min().unwrap_or(0);
    let max = counts.iter().map(|c| c.1).max().unwrap_or(0);
    if min == max {
        format!("{nonzero} ({max} songs each)")
    } else {
        format!("{nonzero} ({min} to {max} songs)")
    }
}

impl DatasetStats {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, k: &str, v: String| {
            let _ = writeln!(out, "{k:<20}{v}");
        };
        row(&mut out, "Files", self.files.to_string());
        row(&mut out, "Failed generations", self.failures.to_string());
        row(&mut out, "Note events", self.total_notes.to_string());
        row(&mut out, "Genres", spread(&self.per_genre));
        row(&mut out, "Styles", spread(&self.per_style));
        let hist = |xs: &[(String, usize)]| {
            xs.iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        row(&mut out, "Moods", hist(&self.per_mood));
        row(&mut out, "Temperatures", hist(&self.temperatures));
        out
    }
}
