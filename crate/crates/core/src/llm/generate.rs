use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use midistring_nn::rng::{stream_rng, sub_seed};
use rand::Rng;

use super::{
    build_generation_prompt, temperature_for_index, BackendError, CompletionRequest, LlmBackend,
};
use crate::codec::{extract_json_payload, parse_song, serialize_song, CodecError};
use crate::datastore::manifest::{
    content_hash, read_manifest, song_id, Manifest, ManifestError, ManifestRow, ManifestWriter,
    RowOutcome,
};
use crate::midi::song_to_midi;
use crate::music::{label_slug, song_note_count, Song, SongMeta, Taxonomy};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Success,
    Failure(GenerationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub meta: SongMeta,
    pub attempts: u32,
    pub outcome: Outcome,
}

/// Requests a song until one parses and validates, resending the full
/// prompt each time. Attempt `a` uses request seed `seed + a`.
pub fn generate_song(
    backend: &dyn LlmBackend,
    taxonomy: &Taxonomy,
    genre: usize,
    style: usize,
    mood: usize,
    index: u32,
    max_attempts: u32,
    seed: u64,
) -> Result<(Song, GenerationRecord), GenerationRecord> {
    assert!(max_attempts >= 1, "max_attempts must be positive");
    let temperature = temperature_for_index(index);
    let meta = SongMeta {
        genre,
        style,
        mood,
        temperature,
        song_index: index,
        source: backend.source(),
    };
    let prompt = build_generation_prompt(
        &taxonomy.genres[genre],
        &taxonomy.styles[style],
        &taxonomy.moods[mood],
        taxonomy,
    )
    .expect("indices come from the taxonomy");
    let mut last = None;
    for attempt in 0..max_attempts {
        let req = CompletionRequest::generation(
            prompt.clone(),
            temperature,
            seed.wrapping_add(u64::from(attempt)),
        );
        let result = backend
            .complete(&req)
            .map_err(GenerationError::from)
            .and_then(|raw| Ok(parse_song(extract_json_payload(&raw)?, meta.clone())?));
        match result {
            Ok(song) => {
                let rec = GenerationRecord {
                    meta,
                    attempts: attempt + 1,
                    outcome: Outcome::Success,
                };
                return Ok((song, rec));
            }
            Err(e) => {
                log::debug!(
                    "attempt {} for genre {genre} style {style} index {index} failed: {e}",
                    attempt + 1
                );
                last = Some(e);
            }
        }
    }
    Err(GenerationRecord {
        meta,
        attempts: max_attempts,
        outcome: Outcome::Failure(last.unwrap()),
    })
}

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub out_dir: PathBuf,
    pub per_combo: u32,
    pub seed: u64,
    pub concurrency: usize,
    pub max_attempts: u32,
    /// Restrict the sweep to these genre indices (all when `None`).
    pub genres: Option<Vec<usize>>,
    pub styles: Option<Vec<usize>>,
    pub resume: bool,
}

impl GenerateOptions {
    pub fn new(out_dir: impl Into<PathBuf>, per_combo: u32, seed: u64) -> Self {
        Self {
            out_dir: out_dir.into(),
            per_combo,
            seed,
            concurrency: 1,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            genres: None,
            styles: None,
            resume: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("{0} already exists; pass resume to continue it")]
    ManifestExists(PathBuf),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

struct Job {
    id: String,
    genre: usize,
    style: usize,
    index: u32,
    rel_stem: String,
}

type JobResult = Result<(Song, GenerationRecord), GenerationRecord>;

/// Runs the genre x style x index sweep, writing `<genre>/<style>/<index>.song.json`
/// and `.mid` files plus `manifest.jsonl` under `out_dir`. Rows are appended
/// in sweep order whatever order the backend calls finish in.
pub fn generate_dataset(
    backend: &dyn LlmBackend,
    taxonomy: &Taxonomy,
    opts: &GenerateOptions,
) -> Result<Manifest, SweepError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SweepError::Io { path, source }
    };
    std::fs::create_dir_all(&opts.out_dir).map_err(io(&opts.out_dir))?;
    let manifest_path = opts.out_dir.join(MANIFEST_FILE);
    let done: HashSet<String> = if manifest_path.exists() {
        if !opts.resume {
            return Err(SweepError::ManifestExists(manifest_path));
        }
        // Opening first drops a partial trailing line so the read succeeds.
        drop(ManifestWriter::open(&manifest_path)?);
        read_manifest(&manifest_path)?
            .rows
            .into_iter()
            .map(|r| r.id)
            .collect()
    } else {
        HashSet::new()
    };

    let genres = opts
        .genres
        .clone()
        .unwrap_or_else(|| (0..taxonomy.genres.len()).collect());
    let styles = opts
        .styles
        .clone()
        .unwrap_or_else(|| (0..taxonomy.styles.len()).collect());
    let mut jobs = Vec::new();
    for &g in &genres {
        for &s in &styles {
            let (gs, ss) = (
                label_slug(&taxonomy.genres[g]),
                label_slug(&taxonomy.styles[s]),
            );
            for index in 0..opts.per_combo {
                let id = song_id(&gs, &ss, index);
                if !done.contains(&id) {
                    jobs.push(Job {
                        rel_stem: format!("{gs}/{ss}/{index}"),
                        id,
                        genre: g,
                        style: s,
                        index,
                    });
                }
            }
        }
    }
    log::info!(
        "{} songs to generate, {} already in the manifest",
        jobs.len(),
        done.len()
    );

    let mut writer = ManifestWriter::open(&manifest_path)?;
    let next = AtomicUsize::new(0);
    let workers = opts.concurrency.clamp(1, jobs.len().max(1));
    let write_result: Result<(), SweepError> = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, JobResult)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next) = (&jobs, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let seed = sub_seed(opts.seed, &format!("song/{}", job.id));
                let mood = pick_mood(opts.seed, &job.id, taxonomy.moods.len());
                let r = generate_song(
                    backend,
                    taxonomy,
                    job.genre,
                    job.style,
                    mood,
                    job.index,
                    opts.max_attempts,
                    seed,
                );
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut cursor = 0;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&cursor) {
                let job = &jobs[cursor];
                let row = persist(&opts.out_dir, job, r, taxonomy, opts.seed)?;
                writer.append(&row)?;
                cursor += 1;
                if cursor % 100 == 0 {
                    log::info!("{cursor}/{} songs written", jobs.len());
                }
            }
        }
        Ok(())
    });
    write_result?;
    Ok(read_manifest(&manifest_path)?)
}

/// Seeded uniform mood choice for one song id.
pub fn pick_mood(seed: u64, id: &str, moods: usize) -> usize {
    stream_rng(sub_seed(seed, &format!("mood/{id}")), 0).random_range(0..moods)
}

fn persist(
    out_dir: &Path,
    job: &Job,
    r: JobResult,
    taxonomy: &Taxonomy,
    seed: u64,
) -> Result<ManifestRow, SweepError> {
    let (song, rec) = match r {
        Ok((song, rec)) => (Some(song), rec),
        Err(rec) => (None, rec),
    };
    let mut row = ManifestRow {
        id: job.id.clone(),
        genre: taxonomy.genres[job.genre].clone(),
        style: taxonomy.styles[job.style].clone(),
        mood: taxonomy.moods[rec.meta.mood].clone(),
        temperature: rec.meta.temperature,
        song_index: job.index,
        json_path: None,
        midi_path: None,
        note_count: 0,
        attempts: rec.attempts,
        outcome: RowOutcome::Failure,
        error: None,
        content_hash: None,
        seed,
    };
    match (song, rec.outcome) {
        (Some(song), Outcome::Success) => {
            let json = serialize_song(&song).expect("generated songs are valid");
            let midi = song_to_midi(&song).expect("generated songs are valid");
            let (jp, mp) = (
                format!("{}.song.json", job.rel_stem),
                format!("{}.mid", job.rel_stem),
            );
            let dir = out_dir.join(&job.rel_stem).parent().unwrap().to_path_buf();
            std::fs::create_dir_all(&dir).map_err(|source| SweepError::Io { path: dir, source })?;
            for (p, bytes) in [(&jp, json.as_bytes()), (&mp, midi.as_slice())] {
                let path = out_dir.join(p);
                std::fs::write(&path, bytes).map_err(|source| SweepError::Io { path, source })?;
            }
            row.content_hash = Some(content_hash(json.as_bytes(), &midi));
            row.note_count = song_note_count(&song);
            row.json_path = Some(jp);
            row.midi_path = Some(mp);
            row.outcome = RowOutcome::Success;
        }
        (_, Outcome::Failure(e)) => row.error = Some(e.to_string()),
        (None, Outcome::Success) => unreachable!("success always carries a song"),
    }
    Ok(row)
}
