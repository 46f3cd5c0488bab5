//! Canonical JSON song format and payload extraction from raw completions.
//!
//! Canonical form: keys `melody`, `chords`, `bass`, `rhythm` in that order,
//! each mapping to an array of `[pitch, duration, velocity, start]` tuples,
//! with `", "` and `": "` separators and no trailing newline.

use std::fmt::Write as _;

use serde_json::Value;

use crate::music::{validate_song, NoteEvent, Song, SongMeta, TrackRole, ValidationError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("wrong shape: {0}")]
    WrongShape(String),
    #[error("validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<ValidationError>),
    #[error("no JSON object found in completion")]
    NoJsonFound,
}

pub fn serialize_song(song: &Song) -> Result<String, CodecError> {
    validate_song(song).map_err(CodecError::ValidationFailed)?;
    let mut out = String::with_capacity(64 + crate::music::song_note_count(song) * 22);
    out.push('{');
    for (i, role) in TrackRole::ALL.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "\"{}\": [", role.name()).unwrap();
        for (j, n) in song.track(role).iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            write!(
                out,
                "[{}, {}, {}, {}]",
                n.pitch, n.duration, n.velocity, n.start
            )
            .unwrap();
        }
        out.push(']');
    }
    out.push('}');
    Ok(out)
}

/// Parses a song object, sorts its tracks canonically and validates it.
/// Keys other than the four roles are ignored.
pub fn parse_song(text: &str, meta: SongMeta) -> Result<Song, CodecError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CodecError::MalformedJson(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(CodecError::WrongShape("top level is not an object".into()));
    };
    let mut song = Song {
        tracks: Default::default(),
        meta,
    };
    for role in TrackRole::ALL {
        let Some(v) = map.get(role.name()) else {
            continue;
        };
        let Value::Array(items) = v else {
            return Err(CodecError::WrongShape(format!("{role} is not an array")));
        };
        let mut notes = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            notes.push(
                parse_tuple(item)
                    .map_err(|m| CodecError::WrongShape(format!("{role} note {i}: {m}")))?,
            );
        }
        notes.sort_by_key(NoteEvent::sort_key);
        song.tracks.insert(role, notes);
    }
    validate_song(&song).map_err(CodecError::ValidationFailed)?;
    Ok(song)
}

fn parse_tuple(v: &Value) -> Result<NoteEvent, String> {
    let Value::Array(xs) = v else {
        return Err("not an array".into());
    };
    if xs.len() != 4 {
        return Err(format!("expected 4 elements, found {}", xs.len()));
    }
    let mut f = [0i64; 4];
    for (slot, x) in f.iter_mut().zip(xs) {
        *slot = x.as_i64().ok_or_else(|| format!("{x} is not an integer"))?;
    }
    Ok(NoteEvent::new(f[0], f[1], f[2], f[3]))
}

/// First balanced `{...}` substring of `raw`. Braces inside JSON strings are
/// not counted; text before the first `{` is ignored.
pub fn extract_json_payload(raw: &str) -> Result<&str, CodecError> {
    let bytes = raw.as_bytes();
    let mut search = 0;
    while let Some(off) = raw[search..].find('{') {
        let start = search + off;
        let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(&raw[start..=i]);
                    }
                }
                _ => {}
            }
        }
        // Unbalanced from here on; an object further in can only be nested in it.
        search = start + 1;
    }
    Err(CodecError::NoJsonFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::music::{ValidationKind, HIHAT, KICK};

    pub(crate) fn small_song() -> Song {
        let mut s = Song::empty(SongMeta::default());
        s.track_mut(TrackRole::Melody).extend([
            NoteEvent::new(62, 480, 90, 0),
            NoteEvent::new(64, 240, 80, 480),
        ]);
        s.track_mut(TrackRole::Chords)
            .push(NoteEvent::new(60, 960, 70, 0));
        s.track_mut(TrackRole::Bass)
            .push(NoteEvent::new(36, 960, 100, 0));
        s.track_mut(TrackRole::Rhythm).extend([
            NoteEvent::new(KICK, 240, 110, 0),
            NoteEvent::new(HIHAT, 240, 60, 0),
        ]);
        s
    }

    #[test]
    fn golden_bytes() {
        let text = serialize_song(&small_song()).unwrap();
        assert_eq!(
            text,
            r#"{"melody": [[62, 480, 90, 0], [64, 240, 80, 480]], "chords": [[60, 960, 70, 0]], "bass": [[36, 960, 100, 0]], "rhythm": [[35, 240, 110, 0], [42, 240, 60, 0]]}"#
        );
        assert!(text.contains(r#""melody": [[62, 480, 90, 0]"#));
    }

    #[test]
    fn round_trip_and_resort() {
        let s = small_song();
        let back = parse_song(&serialize_song(&s).unwrap(), SongMeta::default()).unwrap();
        assert_eq!(back, s);
        let shuffled = r#"{"rhythm": [[42, 240, 60, 0], [35, 240, 110, 0]], "bass": [[36, 960, 100, 0]],
            "chords": [[60, 960, 70, 0]], "melody": [[64, 240, 80, 480], [62, 480, 90, 0]], "comment": 1}"#;
        assert_eq!(parse_song(shuffled, SongMeta::default()).unwrap(), s);
    }

    #[test]
    fn shape_errors() {
        let meta = SongMeta::default;
        assert!(matches!(
            parse_song(r#"{"melody": [[62, 480, 90]]}"#, meta()),
            Err(CodecError::WrongShape(_))
        ));
        assert!(matches!(
            parse_song(r#"{"melody": [[62, 480.5, 90, 0]]}"#, meta()),
            Err(CodecError::WrongShape(_))
        ));
        assert!(matches!(
            parse_song(r#"{"melody": [[62, 480.0, 90, 0]]}"#, meta()),
            Err(CodecError::WrongShape(_))
        ));
        assert!(matches!(
            parse_song(r#"{"melody": "x"}"#, meta()),
            Err(CodecError::WrongShape(_))
        ));
        assert!(matches!(
            parse_song("[1]", meta()),
            Err(CodecError::WrongShape(_))
        ));
        assert!(matches!(
            parse_song("{\"melody\": [", meta()),
            Err(CodecError::MalformedJson(_))
        ));
    }

    #[test]
    fn missing_rhythm_is_validation_error() {
        let text = serialize_song(&small_song()).unwrap();
        let cut = text.find(", \"rhythm\"").unwrap();
        let text = format!("{}}}", &text[..cut]);
        match parse_song(&text, SongMeta::default()) {
            Err(CodecError::ValidationFailed(errs)) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].kind, ValidationKind::MissingTrack);
                assert_eq!(errs[0].role, Some(TrackRole::Rhythm));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extraction_examples() {
        assert_eq!(
            extract_json_payload("```json\n{\"melody\": []}\n```").unwrap(),
            "{\"melody\": []}"
        );
        assert_eq!(
            extract_json_payload("Here is the song: {\"melody\": []} Enjoy!").unwrap(),
            "{\"melody\": []}"
        );
        assert_eq!(
            extract_json_payload("no braces here"),
            Err(CodecError::NoJsonFound)
        );
        assert_eq!(
            extract_json_payload(r#"{"a": "}{", "b": {"c": "\"}"}} tail"#).unwrap(),
            r#"{"a": "}{", "b": {"c": "\"}"}}"#
        );
        assert_eq!(
            extract_json_payload("{\"melody\": [[1, 2"),
            Err(CodecError::NoJsonFound)
        );
        assert_eq!(
            extract_json_payload("{ truncated {\"x\": 1}").unwrap(),
            "{\"x\": 1}"
        );
    }
}
