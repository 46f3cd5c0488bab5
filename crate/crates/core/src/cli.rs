//! Command-line interface.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.
//!
//! `--config FILE` names a TOML file. Top-level keys set global flags and a
//! table named after a subcommand sets that subcommand's flags, e.g.
//!
//! ```toml
//! taxonomy = "taxonomy.toml"
//! [generate]
//! backend = "mock"
//! per-combo = 4
//! genres = ["pop", "jazz"]
//! ```
//!
//! Flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use crate::codec::{parse_song, serialize_song};
use crate::datastore::labels::ingest_labels;
use crate::datastore::manifest::{read_manifest, Manifest};
use crate::datastore::queries::{make_queries, read_queries, write_queries};
use crate::datastore::split::{split_dataset, write_splits, SplitSpec, Stratify, SPLIT_NAMES};
use crate::datastore::stats::dataset_stats;
use crate::datastore::{audit, load_songs};
use crate::llm::{
    generate_dataset, zero_shot_classify, GenerateOptions, LlmBackend, MockBackend, Recognition,
    RemoteHttp, DEFAULT_MAX_ATTEMPTS, MANIFEST_FILE,
};
use crate::metrics::{per_class, weighted_f1};
use crate::midi::{midi_to_song, song_to_midi};
use crate::models::{
    eval_melody, evaluate_classifier, CnnConfig, CnnTrainer, EvalReport, LabeledRoll,
    MelodyTrainer, PhrasePair, TrainConfig, TransformerConfig,
};
use crate::music::{Song, SongMeta, Task, Taxonomy, TrackRole};
use crate::pianoroll::{melody_phrases, render_roll, song_to_roll, RollTensor};
use midistring_nn::Checkpoint;

#[derive(Parser, Debug)]
#[command(
    name = "midistring",
    version,
    about = "Generate, convert, classify and rank four-track songs"
)]
#[command(args_override_self = true)]
struct Cli {
    /// TOML file of flag defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Label taxonomy (TOML with genres, styles and moods lists).
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Remote,
    Mock,
}

#[derive(clap::Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset by sweeping genre x style x index.
    Generate {
        #[arg(long, value_enum, default_value_t = BackendKind::Remote)]
        backend: BackendKind,
        #[arg(long, default_value_t = 50)]
        per_combo: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        concurrency: usize,
        /// Continue an interrupted sweep in `--out`.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u32,
        /// Only these genres (comma separated labels).
        #[arg(long, value_delimiter = ',')]
        genres: Vec<String>,
        /// Only these styles (comma separated labels).
        #[arg(long, value_delimiter = ',')]
        styles: Vec<String>,
    },
    /// Check manifest files exist, match their hashes and validate.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Convert a JSON song to a MIDI file.
    Json2midi { input: PathBuf, output: PathBuf },
    /// Convert a MIDI file to a JSON song.
    Midi2json {
        input: PathBuf,
        output: PathBuf,
        /// Assign a track to a role, e.g. `--role 2=bass`; repeatable.
        #[arg(long = "role", value_parser = parse_role)]
        roles: Vec<(usize, TrackRole)>,
    },
    /// Render the piano roll of a JSON song or MIDI file as a PNG image.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset statistics.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Train the CNN classifier on a manifest.
    TrainClassify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainArgs,
    },
    /// Evaluate a CNN checkpoint on a labeled CSV or a manifest.
    EvalClassify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(
            long,
            required_unless_present = "manifest",
            conflicts_with = "manifest"
        )]
        labels: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Ask a language model to label songs.
    ZeroshotClassify {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, value_enum, default_value_t = BackendKind::Remote)]
        backend: BackendKind,
        #[arg(
            long,
            required_unless_present = "manifest",
            conflicts_with = "manifest"
        )]
        labels: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Classify at most this many songs.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train the melody transformer on a manifest's phrase pairs.
    TrainMelody {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainArgs,
    },
    /// Rank candidate continuations and report MAP and HITS@k.
    EvalMelody {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Stratified train/val/test split of a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Train, validation and test fractions, space or comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..=3, default_values_t = [0.8, 0.1, 0.1])]
        ratios: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Stratify::GenreStyle)]
        stratify: Stratify,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build ranking queries from a manifest's melodies.
    MakeQueries {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_role(s: &str) -> Result<(usize, TrackRole), String> {
    let (t, r) = s.split_once('=').ok_or("expected TRACK=ROLE")?;
    let track = t
        .trim()
        .parse()
        .map_err(|_| format!("bad track index {t:?}"))?;
    let role = TrackRole::from_name(r.trim()).ok_or_else(|| format!("unknown role {r:?}"))?;
    Ok((track, role))
}

/// Raised for bad input that clap cannot see, such as a broken config file.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn toml_to_args(key: &str, value: &toml::Value, out: &mut Vec<OsString>) -> Result<(), UsageError> {
    let flag = format!("--{key}");
    match value {
        toml::Value::Boolean(true) => out.push(flag.into()),
        toml::Value::Boolean(false) => {}
        toml::Value::String(s) => out.extend([flag.into(), s.into()]),
        toml::Value::Integer(i) => out.extend([flag.into(), i.to_string().into()]),
        toml::Value::Float(f) => out.extend([flag.into(), f.to_string().into()]),
        toml::Value::Array(items) => {
            let mut parts = Vec::new();
            for v in items {
                parts.push(match v {
                    toml::Value::String(s) => s.clone(),
                    toml::Value::Integer(i) => i.to_string(),
                    toml::Value::Float(f) => f.to_string(),
                    _ => {
                        return Err(UsageError(format!(
                            "config key {key}: unsupported list item"
                        )))
                    }
                });
            }
            out.extend([flag.into(), parts.join(",").into()]);
        }
        _ => return Err(UsageError(format!("config key {key}: unsupported value"))),
    }
    Ok(())
}

/// Splices flags from the `--config` file into `argv`, skipping any flag
/// already present on the command line.
fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>, UsageError> {
    let strs: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let config_path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(config_path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| UsageError(format!("cannot read config {config_path}: {e}")))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| UsageError(format!("config {config_path}: {e}")))?;

    let subcommands: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect();
    let sub_pos = strs
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(a))
        .map(|p| p + 1);
    let given = |key: &str| {
        let flag = format!("--{key}");
        strs.iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let (mut global, mut local) = (Vec::new(), Vec::new());
    for (key, value) in &table {
        match value {
            toml::Value::Table(sub) => {
                if Some(key) == sub_pos.map(|p| &strs[p]) {
                    for (k, v) in sub {
                        if !given(k) {
                            toml_to_args(k, v, &mut local)?;
                        }
                    }
                } else if !subcommands.contains(key) {
                    return Err(UsageError(format!(
                        "config table [{key}] is not a subcommand"
                    )));
                }
            }
            _ if key == "config" => {
                return Err(UsageError("config files cannot name another config".into()))
            }
            _ if !given(key) => toml_to_args(key, value, &mut global)?,
            _ => {}
        }
    }
    let mut out = vec![argv[0].clone()];
    out.extend(global);
    match sub_pos {
        Some(p) => {
            out.extend(argv[1..=p].iter().cloned());
            out.extend(local);
            out.extend(argv[p + 1..].iter().cloned());
        }
        None => out.extend(argv[1..].iter().cloned()),
    }
    Ok(out)
}

fn load_taxonomy(path: Option<&Path>) -> anyhow::Result<Taxonomy> {
    match path {
        Some(p) => Ok(Taxonomy::load(p)?),
        None => Ok(Taxonomy::default()),
    }
}

/// Accepts a manifest file or the directory holding `manifest.jsonl`.
fn open_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    read_manifest(&file).with_context(|| format!("reading manifest {}", file.display()))
}

fn make_backend(
    kind: BackendKind,
    taxonomy: &Taxonomy,
    seed: u64,
) -> anyhow::Result<Box<dyn LlmBackend>> {
    Ok(match kind {
        BackendKind::Mock => Box::new(MockBackend::new(taxonomy.clone(), seed)),
        BackendKind::Remote => Box::new(RemoteHttp::from_env()?),
    })
}

fn read_song_file(path: &Path) -> anyhow::Result<Song> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"MThd") {
        Ok(midi_to_song(&bytes, None)?.0)
    } else {
        let text = String::from_utf8(bytes).context("song file is neither MIDI nor UTF-8 JSON")?;
        Ok(parse_song(&text, SongMeta::default())?)
    }
}

fn write_report(report: &EvalReport, path: Option<&Path>) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn task_label(song: &Song, task: Task) -> usize {
    match task {
        Task::Genre => song.meta.genre,
        Task::Style => song.meta.style,
    }
}

/// Songs with their labels for `task`, from a CSV or a manifest.
fn labeled_songs(
    labels: Option<&Path>,
    manifest: Option<&Path>,
    taxonomy: &Taxonomy,
    task: Task,
) -> anyhow::Result<Vec<(Song, usize)>> {
    match (labels, manifest) {
        (Some(csv), _) => {
            let set = ingest_labels(csv, taxonomy, task)?;
            if !set.skipped.is_empty() {
                println!("skipped {} rows of {}", set.skipped.len(), csv.display());
            }
            Ok(set.items.into_iter().map(|i| (i.song, i.label)).collect())
        }
        (None, Some(m)) => {
            let songs = load_songs(&open_manifest(m)?, taxonomy)?;
            Ok(songs
                .into_iter()
                .map(|s| {
                    let label = task_label(&s, task);
                    (s, label)
                })
                .collect())
        }
        (None, None) => Err(UsageError("one of --labels or --manifest is required".into()).into()),
    }
}

fn phrase_pairs(songs: &[Song]) -> Vec<PhrasePair> {
    let pairs: Vec<PhrasePair> = songs
        .iter()
        .filter_map(|s| melody_phrases(s).ok())
        .map(|(source, target)| PhrasePair { source, target })
        .collect();
    if pairs.len() < songs.len() {
        log::info!(
            "{} songs skipped for an empty melody half",
            songs.len() - pairs.len()
        );
    }
    pairs
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let taxonomy = load_taxonomy(cli.taxonomy.as_deref())?;
    match cli.command {
        Command::Generate {
            backend,
            per_combo,
            seed,
            out,
            concurrency,
            resume,
            max_attempts,
            genres,
            styles,
        } => {
            let pick = |labels: &[String], index: &dyn Fn(&str) -> Result<usize, crate::music::TaxonomyError>| {
                if labels.is_empty() {
                    Ok(None)
                } else {
                    labels.iter().map(|l| index(l)).collect::<Result<Vec<_>, _>>().map(Some)
                }
            };
            let mut opts = GenerateOptions::new(&out, per_combo, seed);
            opts.concurrency = concurrency;
            opts.resume = resume;
            opts.max_attempts = max_attempts;
            opts.genres = pick(&genres, &|l| taxonomy.genre_index(l))?;
            opts.styles = pick(&styles, &|l| taxonomy.style_index(l))?;
            let backend = make_backend(backend, &taxonomy, seed)?;
            let manifest = generate_dataset(backend.as_ref(), &taxonomy, &opts)?;
            let ok = manifest.successes().count();
            println!(
                "{ok} songs, {} failed generations, manifest {}",
                manifest.rows.len() - ok,
                out.join(MANIFEST_FILE).display()
            );
        }
        Command::Validate { manifest } => {
            let m = open_manifest(&manifest)?;
            let report = audit(&m, &taxonomy);
            for (id, problem) in &report.problems {
                println!("{id}: {problem}");
            }
            println!(
                "{} songs checked, {} problems",
                report.checked,
                report.problems.len()
            );
            if !report.is_clean() {
                bail!("audit found {} problems", report.problems.len());
            }
        }
        Command::Json2midi { input, output } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let song = parse_song(&text, SongMeta::default())?;
            std::fs::write(&output, song_to_midi(&song)?)
                .with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Midi2json {
            input,
            output,
            roles,
        } => {
            let bytes =
                std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let mapping: BTreeMap<usize, TrackRole> = roles.into_iter().collect();
            let (song, report) = midi_to_song(&bytes, (!mapping.is_empty()).then_some(&mapping))?;
            for a in &report.assignments {
                println!(
                    "track {} channel {} -> {} ({})",
                    a.source.track,
                    a.source.channel + 1,
                    a.role,
                    a.reason
                );
            }
            for s in &report.unassigned {
                println!("track {} channel {} unassigned", s.track, s.channel + 1);
            }
            std::fs::write(&output, serialize_song(&song)?)
                .with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Render { input, out } => {
            let song = read_song_file(&input)?;
            render_roll(&song_to_roll(&song), &out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Stats { manifest, json } => {
            let s = dataset_stats(&open_manifest(&manifest)?, &taxonomy);
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                print!("{}", s.table());
            }
        }
        Command::TrainClassify { train, out, opts } => {
            midistring_nn::flush_denormals();
            let songs = load_songs(&open_manifest(&train)?, &taxonomy)?;
            let data: Vec<LabeledRoll> = songs
                .iter()
                .map(|s| LabeledRoll {
                    roll: song_to_roll(s),
                    genre: s.meta.genre,
                    style: s.meta.style,
                })
                .collect();
            let config = CnnConfig {
                genres: taxonomy.genres.len(),
                styles: taxonomy.styles.len(),
                ..CnnConfig::default()
            };
            let mut trainer = CnnTrainer::new(config, opts.config(), &taxonomy);
            let epochs = opts.epochs;
            trainer.fit(&data, |e, l| {
                println!("epoch {}/{epochs} loss {l:.4}", e + 1)
            })?;
            trainer
                .to_checkpoint()
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("checkpoint {}", out.display());
        }
        Command::EvalClassify {
            checkpoint,
            task,
            labels,
            manifest,
            report,
        } => {
            midistring_nn::flush_denormals();
            let trainer = CnnTrainer::from_checkpoint(Checkpoint::load(&checkpoint)?)?;
            let ck_taxonomy = Taxonomy::new(
                trainer.genres.clone(),
                trainer.styles.clone(),
                taxonomy.moods.clone(),
            )?;
            let songs = labeled_songs(labels.as_deref(), manifest.as_deref(), &ck_taxonomy, task)?;
            let rolls: Vec<RollTensor> = songs.iter().map(|(s, _)| song_to_roll(s)).collect();
            let gold: Vec<usize> = songs.iter().map(|(_, l)| *l).collect();
            let r = evaluate_classifier(&trainer, &rolls.iter().collect::<Vec<_>>(), &gold, task)?;
            print!("{}", r.summary_table("CNN"));
            write_report(&r, report.as_deref())?;
        }
        Command::ZeroshotClassify {
            task,
            backend,
            labels,
            manifest,
            seed,
            limit,
            report,
        } => {
            let mut songs = labeled_songs(labels.as_deref(), manifest.as_deref(), &taxonomy, task)?;
            songs.truncate(limit.unwrap_or(usize::MAX));
            let backend = make_backend(backend, &taxonomy, seed)?;
            let names = taxonomy.labels(task);
            let unmatched = names.len();
            let mut pred = Vec::with_capacity(songs.len());
            for (song, _) in &songs {
                pred.push(
                    match zero_shot_classify(backend.as_ref(), song, task, &taxonomy, Some(seed))? {
                        Recognition::Matched(i) => i,
                        Recognition::Unmatched(_) => unmatched,
                    },
                );
            }
            let gold: Vec<usize> = songs.iter().map(|(_, l)| *l).collect();
            let mut label_names = names.to_vec();
            label_names.push("(unmatched)".into());
            let mut r = EvalReport::new(
                format!("zeroshot-{}", task.name()),
                gold.len(),
                seed,
                String::new(),
            );
            r.metrics.insert(
                "weighted_f1".into(),
                weighted_f1(&gold, &pred, unmatched + 1)?,
            );
            let hits = gold.iter().zip(&pred).filter(|(a, b)| a == b).count();
            r.metrics
                .insert("accuracy".into(), hits as f64 / gold.len() as f64);
            let misses = pred.iter().filter(|&&p| p == unmatched).count();
            r.metrics
                .insert("unmatched_rate".into(), misses as f64 / gold.len() as f64);
            r.per_class = per_class(&gold, &pred, unmatched + 1, &label_names)?;
            r.per_class.pop();
            print!("{}", r.summary_table("LLM zero-shot"));
            write_report(&r, report.as_deref())?;
        }
        Command::TrainMelody { train, out, opts } => {
            midistring_nn::flush_denormals();
            let songs = load_songs(&open_manifest(&train)?, &taxonomy)?;
            let pairs = phrase_pairs(&songs);
            let mut trainer = MelodyTrainer::new(TransformerConfig::default(), opts.config());
            let epochs = opts.epochs;
            trainer.fit(&pairs, |e, l| {
                println!("epoch {}/{epochs} loss {l:.4}", e + 1)
            })?;
            trainer
                .to_checkpoint()
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("checkpoint {}", out.display());
        }
        Command::EvalMelody {
            checkpoint,
            queries,
            report,
        } => {
            midistring_nn::flush_denormals();
            let trainer = MelodyTrainer::from_checkpoint(Checkpoint::load(&checkpoint)?)?;
            let queries =
                read_queries(&queries).with_context(|| format!("reading {}", queries.display()))?;
            let r = eval_melody(
                &trainer,
                &queries,
                trainer.train.seed,
                trainer.config_hash(),
            )?;
            print!("{}", r.summary_table("Transformer"));
            write_report(&r, report.as_deref())?;
        }
        Command::Split {
            manifest,
            ratios,
            stratify,
            seed,
        } => {
            let Ok(ratios) = <[f64; 3]>::try_from(ratios.as_slice()) else {
                return Err(UsageError(format!(
                    "--ratios takes 3 fractions, got {}",
                    ratios.len()
                ))
                .into());
            };
            let m = open_manifest(&manifest)?;
            let spec = SplitSpec {
                ratios,
                seed,
                stratify,
            };
            let result = split_dataset(&m, &spec)?;
            for w in &result.warnings {
                log::warn!("{w}");
            }
            let paths = write_splits(&m, &result)?;
            for ((name, rows), path) in SPLIT_NAMES.iter().zip(result.parts()).zip(&paths) {
                println!("{name}: {} songs -> {}", rows.len(), path.display());
            }
        }
        Command::MakeQueries {
            manifest,
            out,
            count,
            seed,
        } => {
            let songs = load_songs(&open_manifest(&manifest)?, &taxonomy)?;
            let queries = make_queries(&phrase_pairs(&songs), count, seed)?;
            write_queries(&out, &queries)?;
            println!("{} queries -> {}", queries.len(), out.display());
        }
    }
    Ok(())
}
