//! Stratified, seeded train/val/test partitions of a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use midistring_nn::rng::{stream_rng, sub_seed};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, Manifest, ManifestError, ManifestRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Stratify {
    Genre,
    Style,
    GenreStyle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify: Stratify,
}

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("ratios {0:?} must be non-negative and sum to 1")]
    BadRatios([f64; 3]),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitResult {
    pub train: Vec<ManifestRow>,
    pub val: Vec<ManifestRow>,
    pub test: Vec<ManifestRow>,
    pub warnings: Vec<String>,
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

impl SplitResult {
    pub fn parts(&self) -> [&Vec<ManifestRow>; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Largest-remainder apportionment of `n` items; leftover units go to the
/// largest fractional parts, lower index first on ties.
pub fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut counts = exact.map(|x| x.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn stratum_key(row: &ManifestRow, by: Stratify) -> String {
    match by {
        Stratify::Genre => row.genre.clone(),
        Stratify::Style => row.style.clone(),
        Stratify::GenreStyle => format!("{}\u{0}{}", row.genre, row.style),
    }
}

/// Partitions the successful rows. Each stratum is shuffled with its own
/// seeded stream and cut by [`apportion`]; parts keep manifest order.
pub fn split_dataset(manifest: &Manifest, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    let sum: f64 = spec.ratios.iter().sum();
    if spec.ratios.iter().any(|&r| !(r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadRatios(spec.ratios));
    }
    let rows: Vec<&ManifestRow> = manifest.successes().collect();
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        strata
            .entry(stratum_key(r, spec.stratify))
            .or_default()
            .push(i);
    }
    let nonzero = spec.ratios.iter().filter(|&&r| r > 0.0).count();
    let mut part = vec![0usize; rows.len()];
    let mut result = SplitResult::default();
    for (key, mut members) in strata {
        if nonzero == 3 && members.len() < 3 {
            result.warnings.push(format!(
                "stratum {:?} has {} songs, fewer than the three parts",
                key.replace('\u{0}', "/"),
                members.len()
            ));
        }
        members.shuffle(&mut stream_rng(
            sub_seed(spec.seed, &format!("split/{key}")),
            0,
        ));
        let counts = apportion(members.len(), spec.ratios);
        let mut it = members.into_iter();
        for (p, &c) in counts.iter().enumerate() {
            for i in it.by_ref().take(c) {
                part[i] = p;
            }
        }
    }
    for (i, r) in rows.into_iter().enumerate() {
        [&mut result.train, &mut result.val, &mut result.test][part[i]].push(r.clone());
    }
    Ok(result)
}

/// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` next to the source
/// manifest so relative paths stay valid.
pub fn write_splits(manifest: &Manifest, result: &SplitResult) -> Result<[PathBuf; 3], SplitError> {
    let paths = SPLIT_NAMES.map(|n| split_path(&manifest.dir, n));
    for (path, rows) in paths.iter().zip(result.parts()) {
        write_manifest(path, rows)?;
    }
    Ok(paths)
}

pub fn split_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.jsonl"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(100, [0.8, 0.1, 0.1]), [80, 10, 10]);
        assert_eq!(apportion(4, [0.8, 0.2, 0.0]), [3, 1, 0]);
        assert_eq!(apportion(2, [0.8, 0.1, 0.1]), [2, 0, 0]);
        assert_eq!(apportion(3, [1.0 / 3.0; 3]), [1, 1, 1]);
        assert_eq!(apportion(0, [0.5, 0.5, 0.0]), [0, 0, 0]);
    }
}
