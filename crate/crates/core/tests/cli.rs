use std::path::Path;
use std::process::{Command, Output};

fn midistring(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midistring"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mock_generate_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = midistring(
        &[
            "generate",
            "--backend",
            "mock",
            "--per-combo",
            "1",
            "--genres",
            "pop,jazz",
            "--styles",
            "punk,dance",
            "--out",
            "data",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let data = dir.path().join("data");
    let midis: Vec<_> = ["pop/punk", "pop/dance", "jazz/punk", "jazz/dance"]
        .iter()
        .map(|d| data.join(d).join("0.mid"))
        .collect();
    assert!(midis.iter().all(|p| p.exists()));
    assert_eq!(
        std::fs::read_to_string(data.join("manifest.jsonl"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    let o = midistring(&["validate", "--manifest", "data"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = midistring(
        &["stats", "--manifest", "data/manifest.jsonl", "--json"],
        dir.path(),
    );
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["files"], 4);

    let o = midistring(
        &[
            "generate",
            "--backend",
            "mock",
            "--per-combo",
            "1",
            "--genres",
            "pop",
            "--out",
            "data",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(1),
        "existing manifest without --resume"
    );
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = midistring(&["eval-melody", "--checkpoint", "m.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--queries"));
    assert_eq!(
        midistring(&["stats", "--manifest", "x", "--bogus"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        midistring(&["no-such-command"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        midistring(
            &[
                "generate",
                "--backend",
                "mock",
                "--genres",
                "polka",
                "--out",
                "d"
            ],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(midistring(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[generate]\nbackend = \"mock\"\nper-combo = 2\ngenres = [\"rap\"]\nstyles = [\"gospel\", \"punk\"]\nout = \"from-config\"\n",
    )
    .unwrap();
    let o = midistring(
        &["--config", "run.toml", "generate", "--per-combo", "1"],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let manifest = std::fs::read_to_string(dir.path().join("from-config/manifest.jsonl")).unwrap();
    assert_eq!(
        manifest.lines().count(),
        2,
        "command-line flag overrides the file"
    );

    std::fs::write(dir.path().join("bad.toml"), "[nonsense]\nx = 1\n").unwrap();
    assert_eq!(
        midistring(
            &["--config", "bad.toml", "stats", "--manifest", "m"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn conversions_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pinned.song.json");
    std::fs::copy(&fixture, dir.path().join("song.json")).unwrap();
    assert!(
        midistring(&["json2midi", "song.json", "song.mid"], dir.path())
            .status
            .success()
    );
    let o = midistring(&["midi2json", "song.mid", "back.json"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("-> melody"));
    let original: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fixture).unwrap()).unwrap();
    let back: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("back.json")).unwrap())
            .unwrap();
    for role in ["melody", "chords", "bass", "rhythm"] {
        let mut a = original[role].as_array().unwrap().clone();
        let mut b = back[role].as_array().unwrap().clone();
        let key = |v: &serde_json::Value| v.to_string();
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a, b, "{role}");
    }
    let o = midistring(
        &[
            "midi2json",
            "song.mid",
            "swapped.json",
            "--role",
            "1=bass",
            "--role",
            "2=chords",
            "--role",
            "3=melody",
            "--role",
            "4=rhythm",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let swapped: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("swapped.json")).unwrap())
            .unwrap();
    assert_eq!(swapped["bass"], back["melody"]);

    assert!(
        midistring(&["render", "song.mid", "--out", "roll.png"], dir.path())
            .status
            .success()
    );
    assert_eq!(
        &std::fs::read(dir.path().join("roll.png")).unwrap()[..4],
        b"\x89PNG"
    );
}

#[test]
fn split_ratio_forms() {
    let dir = tempfile::tempdir().unwrap();
    let o = midistring(
        &[
            "generate",
            "--backend",
            "mock",
            "--per-combo",
            "4",
            "--genres",
            "pop",
            "--styles",
            "punk",
            "--out",
            "d",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let count = |name: &str| {
        std::fs::read_to_string(dir.path().join("d").join(name))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(
        midistring(
            &["split", "--manifest", "d", "--ratios", "0.5,0,0.5"],
            dir.path()
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!((count("train.jsonl"), count("test.jsonl")), (2, 2));
    assert_eq!(
        midistring(
            &["split", "--manifest", "d", "--ratios", "0.75", "0.25", "0"],
            dir.path()
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!((count("train.jsonl"), count("val.jsonl")), (3, 1));
    assert_eq!(
        midistring(
            &["split", "--manifest", "d", "--ratios", "0.5,0.5"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}
