mod common;

use std::collections::BTreeMap;

use midistring::codec::parse_song;
use midistring::midi::{
    decode_vlq, encode_vlq, midi_to_song, role_channel, song_to_midi, MidiError,
};
use midistring::music::{SongMeta, TrackRole};
use midistring_nn::rng::stream_rng;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

/// Note events of a file as `(channel, pitch, on_tick, off_tick, velocity)`,
/// pairing each note-off with the earliest open note-on of its key. Written
/// from the SMF layout alone, sharing no code with the crate's reader. Only
/// for files with explicit `0x8n` note-offs: every `0x9n` is a note-on.
fn reference_notes(bytes: &[u8]) -> (u16, u16, Vec<(u8, u8, u64, u64, u8)>) {
    let be16 = |b: &[u8]| u16::from_be_bytes([b[0], b[1]]);
    let be32 = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize;
    assert_eq!(&bytes[..4], b"MThd");
    assert_eq!(be32(&bytes[4..]), 6);
    let (format, ntracks, division) = (be16(&bytes[8..]), be16(&bytes[10..]), be16(&bytes[12..]));
    let mut pos = 14;
    let mut notes = Vec::new();
    for _ in 0..ntracks {
        assert_eq!(&bytes[pos..pos + 4], b"MTrk");
        let len = be32(&bytes[pos + 4..]);
        let track = &bytes[pos + 8..pos + 8 + len];
        pos += 8 + len;
        let (mut i, mut tick, mut status) = (0usize, 0u64, 0u8);
        let mut open: BTreeMap<(u8, u8), Vec<(u64, u8)>> = BTreeMap::new();
        while i < track.len() {
            let mut delta = 0u64;
            loop {
                let b = track[i];
                i += 1;
                delta = (delta << 7) | u64::from(b & 0x7f);
                if b & 0x80 == 0 {
                    break;
                }
            }
            tick += delta;
            if track[i] & 0x80 != 0 {
                status = track[i];
                i += 1;
            }
            match status {
                0xff => {
                    let kind = track[i];
                    let len = track[i + 1] as usize;
                    i += 2 + len;
                    if kind == 0x2f {
                        break;
                    }
                }
                0x80..=0x9f => {
                    let (ch, key, vel) = (status & 0x0f, track[i], track[i + 1]);
                    i += 2;
                    if status >= 0x90 {
                        open.entry((ch, key)).or_default().push((tick, vel));
                    } else {
                        let (on, v) = open
                            .get_mut(&(ch, key))
                            .expect("note-off without note-on")
                            .remove(0);
                        notes.push((ch, key, on, tick, v));
                    }
                }
                0xc0..=0xdf => i += 1,
                _ => i += 2,
            }
        }
        assert!(open.values().all(Vec::is_empty), "unterminated notes");
    }
    notes.sort_unstable();
    (format, division, notes)
}

fn expected_notes(song: &midistring::music::Song) -> Vec<(u8, u8, u64, u64, u8)> {
    let mut v: Vec<_> = TrackRole::ALL
        .iter()
        .flat_map(|&r| {
            song.track(r).iter().map(move |n| {
                (
                    role_channel(r),
                    n.pitch as u8,
                    n.start as u64,
                    (n.start + n.duration) as u64,
                    n.velocity as u8,
                )
            })
        })
        .collect();
    v.sort_unstable();
    v
}

/// Pairing-independent view of a note list: sorted note-ons and note-offs.
#[allow(clippy::type_complexity)]
fn onsets_and_offsets(
    notes: Vec<(u8, u8, u64, u64, u8)>,
) -> (Vec<(u8, u8, u64, u8)>, Vec<(u8, u8, u64)>) {
    let mut on: Vec<_> = notes.iter().map(|&(c, k, s, _, v)| (c, k, s, v)).collect();
    let mut off: Vec<_> = notes.iter().map(|&(c, k, _, e, _)| (c, k, e)).collect();
    on.sort_unstable();
    off.sort_unstable();
    (on, off)
}

const PINNED_SHA256: &str = include_str!("fixtures/pinned.mid.sha256");

#[test]
fn pinned_fixture_bytes() {
    let song = parse_song(
        include_str!("fixtures/pinned.song.json"),
        SongMeta::default(),
    )
    .unwrap();
    let bytes = song_to_midi(&song).unwrap();
    assert_eq!(bytes, include_bytes!("fixtures/pinned.mid"));
    assert_eq!(hex::encode(Sha256::digest(&bytes)), PINNED_SHA256.trim());
    let (format, division, notes) = reference_notes(&bytes);
    assert_eq!((format, division), (1, 480));
    assert_eq!(notes, expected_notes(&song));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_trip(seed in any::<u64>()) {
        let song = common::random_song(&mut stream_rng(seed, 3), 25);
        let bytes = song_to_midi(&song).unwrap();
        let (back, report) = midi_to_song(&bytes, None).unwrap();
        prop_assert_eq!(&back.tracks, &song.tracks);
        prop_assert_eq!(report.assignments.len(), 4);
        prop_assert_eq!(onsets_and_offsets(reference_notes(&bytes).2), onsets_and_offsets(expected_notes(&song)));
    }

    #[test]
    fn explicit_mapping_matches_names(seed in any::<u64>()) {
        let song = common::random_grid_song(&mut stream_rng(seed, 4), 8);
        let bytes = song_to_midi(&song).unwrap();
        let (named, _) = midi_to_song(&bytes, None).unwrap();
        let mapping: BTreeMap<usize, TrackRole> = (1..=4).zip(TrackRole::ALL).collect();
        let (mapped, _) = midi_to_song(&bytes, Some(&mapping)).unwrap();
        prop_assert_eq!(named.tracks, mapped.tracks);
    }

    #[test]
    fn vlq_round_trip(v in 0u32..0x1000_0000) {
        let enc = encode_vlq(v).unwrap();
        prop_assert!(enc.len() <= 4);
        prop_assert!(enc[..enc.len() - 1].iter().all(|b| b & 0x80 != 0));
        prop_assert_eq!(decode_vlq(&enc).unwrap(), (v, enc.len()));
    }

    #[test]
    fn reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
        let _ = midi_to_song(&bytes, None);
        let mut framed = b"MThd\0\0\0\x06\0\x01\0\x01\x01\xe0MTrk".to_vec();
        framed.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        framed.extend_from_slice(&bytes);
        let _ = midi_to_song(&framed, None);
    }
}

#[test]
fn vlq_limits() {
    assert!(matches!(
        encode_vlq(0x1000_0000),
        Err(MidiError::VlqOutOfRange(_))
    ));
    assert!(decode_vlq(&[0x80, 0x80, 0x80, 0x80, 0x00]).is_err());
}
