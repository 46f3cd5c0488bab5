//! Standard MIDI File writer and reader.
//!
//! Written files are format 1 with 480 ticks per quarter note: a conductor
//! track (tempo 120 BPM, 4/4) followed by one named track per role. Note-offs
//! are explicit `0x8n` events with velocity 0, so a `0x9n` with velocity 0
//! in such a file is a real note-on of a silent note. Files that never use
//! `0x8n` get the conventional reading of velocity-0 note-ons as note-offs.

use std::collections::BTreeMap;

use crate::music::{
    normalize_label, validate_song, NoteEvent, Song, SongMeta, TrackRole, ValidationError,
    DURATIONS, HIHAT, KICK, MAX_START, SNARE, TICKS_PER_QUARTER,
};

pub const DIVISION: u16 = 480;
pub const TEMPO_US_PER_QUARTER: u32 = 500_000;
/// General MIDI "Electric Bass (finger)", zero-based.
pub const BASS_PROGRAM: u8 = 33;
pub const PIANO_PROGRAM: u8 = 0;
/// Wire value of General MIDI percussion channel 10.
pub const DRUM_CHANNEL: u8 = 9;
/// Ingested notes shorter than this (after rescaling) are dropped.
pub const MIN_INGEST_DURATION: i64 = 120;

const VLQ_LIMIT: u32 = 1 << 28;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MidiError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("truncated chunk: {0}")]
    TruncatedChunk(String),
    #[error("unsupported SMPTE division {0:#06x}")]
    UnsupportedDivision(u16),
    #[error("no tracks could be mapped to song roles")]
    NoMappableTracks,
    #[error("variable-length quantity longer than 4 bytes")]
    RunawayVlq,
    #[error("value {0} does not fit a variable-length quantity")]
    VlqOutOfRange(u32),
    #[error("track {track}: {detail}")]
    BadEvent { track: usize, detail: String },
    #[error("role mapping: {0}")]
    Mapping(String),
    #[error("song is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSong(Vec<ValidationError>),
}

pub fn encode_vlq(value: u32) -> Result<Vec<u8>, MidiError> {
    if value >= VLQ_LIMIT {
        return Err(MidiError::VlqOutOfRange(value));
    }
    let mut out = vec![(value & 0x7f) as u8];
    let mut v = value >> 7;
    while v > 0 {
        out.push(0x80 | (v & 0x7f) as u8);
        v >>= 7;
    }
    out.reverse();
    Ok(out)
}

/// Returns the value and the number of bytes consumed.
pub fn decode_vlq(bytes: &[u8]) -> Result<(u32, usize), MidiError> {
    let mut value = 0u32;
    for (i, &b) in bytes.iter().enumerate() {
        if i == 4 {
            return Err(MidiError::RunawayVlq);
        }
        value = (value << 7) | u32::from(b & 0x7f);
        if b & 0x80 == 0 {
            return Ok((value, i + 1));
        }
    }
    if bytes.len() >= 4 {
        Err(MidiError::RunawayVlq)
    } else {
        Err(MidiError::TruncatedChunk(
            "variable-length quantity runs past the end of data".into(),
        ))
    }
}

/// One track event. Meta events have `status == 0xFF` and `data = [type, payload..]`;
/// sysex events carry their payload without the length prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub delta: u32,
    pub status: u8,
    pub data: Vec<u8>,
}

impl RawEvent {
    fn meta(delta: u32, kind: u8, payload: &[u8]) -> Self {
        let mut data = vec![kind];
        data.extend_from_slice(payload);
        Self {
            delta,
            status: 0xFF,
            data,
        }
    }

    fn end_of_track() -> Self {
        Self::meta(0, 0x2F, &[])
    }

    fn is_end_of_track(&self) -> bool {
        self.status == 0xFF && self.data.first() == Some(&0x2F)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MidiDocument {
    pub format: u16,
    pub division: u16,
    pub tracks: Vec<Vec<RawEvent>>,
}

impl MidiDocument {
    pub fn to_bytes(&self) -> Result<Vec<u8>, MidiError> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&self.format.to_be_bytes());
        out.extend_from_slice(&(self.tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.division.to_be_bytes());
        for track in &self.tracks {
            let mut body = Vec::new();
            for ev in track {
                body.extend(encode_vlq(ev.delta)?);
                body.push(ev.status);
                match ev.status {
                    0xFF => {
                        body.push(ev.data[0]);
                        body.extend(encode_vlq(ev.data.len() as u32 - 1)?);
                        body.extend_from_slice(&ev.data[1..]);
                    }
                    0xF0 | 0xF7 => {
                        body.extend(encode_vlq(ev.data.len() as u32)?);
                        body.extend_from_slice(&ev.data);
                    }
                    _ => body.extend_from_slice(&ev.data),
                }
            }
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(body.len() as u32).to_be_bytes());
            out.extend(body);
        }
        Ok(out)
    }

    /// Parses a file. Unknown chunk types are skipped; running status is accepted.
    pub fn parse(bytes: &[u8]) -> Result<Self, MidiError> {
        if bytes.len() < 14 || &bytes[..4] != b"MThd" {
            return Err(MidiError::BadHeader("missing MThd chunk".into()));
        }
        let hlen = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if hlen < 6 {
            return Err(MidiError::BadHeader(format!("header length {hlen}")));
        }
        let format = u16::from_be_bytes([bytes[8], bytes[9]]);
        let ntrks = u16::from_be_bytes([bytes[10], bytes[11]]);
        let division = u16::from_be_bytes([bytes[12], bytes[13]]);
        if division & 0x8000 != 0 {
            return Err(MidiError::UnsupportedDivision(division));
        }
        if division == 0 {
            return Err(MidiError::BadHeader("division 0".into()));
        }
        if format > 2 {
            return Err(MidiError::BadHeader(format!("format {format}")));
        }
        let mut pos = 8 + hlen;
        if pos > bytes.len() {
            return Err(MidiError::TruncatedChunk("header".into()));
        }
        let mut tracks = Vec::new();
        while pos < bytes.len() && tracks.len() < ntrks as usize {
            if bytes.len() - pos < 8 {
                return Err(MidiError::TruncatedChunk(format!(
                    "chunk header at byte {pos}"
                )));
            }
            let id = &bytes[pos..pos + 4];
            let len = u32::from_be_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
            let body_start = pos + 8;
            if bytes.len() - body_start < len {
                return Err(MidiError::TruncatedChunk(format!(
                    "chunk at byte {pos} declares {len} bytes, {} remain",
                    bytes.len() - body_start
                )));
            }
            if id == b"MTrk" {
                tracks.push(parse_track(
                    &bytes[body_start..body_start + len],
                    tracks.len(),
                )?);
            }
            pos = body_start + len;
        }
        if tracks.len() < ntrks as usize {
            return Err(MidiError::TruncatedChunk(format!(
                "header declares {ntrks} tracks, found {}",
                tracks.len()
            )));
        }
        Ok(Self {
            format,
            division,
            tracks,
        })
    }
}

fn parse_track(body: &[u8], track: usize) -> Result<Vec<RawEvent>, MidiError> {
    let truncated = || MidiError::TruncatedChunk(format!("track {track} ends mid-event"));
    let mut events = Vec::new();
    let mut pos = 0;
    let mut running: Option<u8> = None;
    while pos < body.len() {
        let (delta, n) = decode_vlq(&body[pos..]).map_err(|e| match e {
            MidiError::TruncatedChunk(_) => truncated(),
            e => e,
        })?;
        pos += n;
        let first = *body.get(pos).ok_or_else(truncated)?;
        let status = if first & 0x80 != 0 {
            pos += 1;
            first
        } else {
            running.ok_or_else(|| MidiError::BadEvent {
                track,
                detail: format!("data byte {first:#04x} without status"),
            })?
        };
        let ev = match status {
            0xFF => {
                let kind = *body.get(pos).ok_or_else(truncated)?;
                let (len, n) = decode_vlq(&body[pos + 1..]).map_err(|_| truncated())?;
                let start = pos + 1 + n;
                let payload = body
                    .get(start..start + len as usize)
                    .ok_or_else(truncated)?;
                pos = start + len as usize;
                running = None;
                RawEvent::meta(delta, kind, payload)
            }
            0xF0 | 0xF7 => {
                let (len, n) = decode_vlq(&body[pos..]).map_err(|_| truncated())?;
                let payload = body
                    .get(pos + n..pos + n + len as usize)
                    .ok_or_else(truncated)?;
                pos += n + len as usize;
                running = None;
                RawEvent {
                    delta,
                    status,
                    data: payload.to_vec(),
                }
            }
            0x80..=0xEF => {
                let width = if matches!(status & 0xF0, 0xC0 | 0xD0) {
                    1
                } else {
                    2
                };
                let data = body.get(pos..pos + width).ok_or_else(truncated)?;
                if data.iter().any(|b| b & 0x80 != 0) {
                    return Err(MidiError::BadEvent {
                        track,
                        detail: format!("status byte inside {status:#04x} message"),
                    });
                }
                pos += width;
                running = Some(status);
                RawEvent {
                    delta,
                    status,
                    data: data.to_vec(),
                }
            }
            _ => {
                return Err(MidiError::BadEvent {
                    track,
                    detail: format!("unexpected status {status:#04x}"),
                })
            }
        };
        let end = ev.is_end_of_track();
        events.push(ev);
        if end {
            break;
        }
    }
    Ok(events)
}

pub fn role_channel(role: TrackRole) -> u8 {
    match role {
        TrackRole::Melody => 0,
        TrackRole::Chords => 1,
        TrackRole::Bass => 2,
        TrackRole::Rhythm => DRUM_CHANNEL,
    }
}

pub fn role_program(role: TrackRole) -> Option<u8> {
    match role {
        TrackRole::Melody | TrackRole::Chords => Some(PIANO_PROGRAM),
        TrackRole::Bass => Some(BASS_PROGRAM),
        TrackRole::Rhythm => None,
    }
}

pub fn song_to_document(song: &Song) -> Result<MidiDocument, MidiError> {
    validate_song(song).map_err(MidiError::InvalidSong)?;
    let tempo = TEMPO_US_PER_QUARTER.to_be_bytes();
    let conductor = vec![
        RawEvent::meta(0, 0x51, &tempo[1..]),
        // 4/4, 24 clocks per click, 8 thirty-seconds per quarter.
        RawEvent::meta(0, 0x58, &[4, 2, 24, 8]),
        RawEvent::end_of_track(),
    ];
    let mut tracks = vec![conductor];
    for role in TrackRole::ALL {
        let ch = role_channel(role);
        let mut events = vec![RawEvent::meta(0, 0x03, role.name().as_bytes())];
        if let Some(p) = role_program(role) {
            events.push(RawEvent {
                delta: 0,
                status: 0xC0 | ch,
                data: vec![p],
            });
        }
        // (tick, off-before-on, pitch, sequence, velocity)
        let mut timed: Vec<(i64, u8, i64, usize, i64)> =
            Vec::with_capacity(song.track(role).len() * 2);
        for (i, n) in song.track(role).iter().enumerate() {
            timed.push((n.start, 1, n.pitch, i, n.velocity));
            timed.push((n.start + n.duration, 0, n.pitch, i, 0));
        }
        timed.sort_unstable();
        let mut now = 0;
        for (tick, on, pitch, _, vel) in timed {
            let status = if on == 1 { 0x90 } else { 0x80 } | ch;
            events.push(RawEvent {
                delta: (tick - now) as u32,
                status,
                data: vec![pitch as u8, vel as u8],
            });
            now = tick;
        }
        events.push(RawEvent::end_of_track());
        tracks.push(events);
    }
    Ok(MidiDocument {
        format: 1,
        division: DIVISION,
        tracks,
    })
}

pub fn song_to_midi(song: &Song) -> Result<Vec<u8>, MidiError> {
    song_to_document(song)?.to_bytes()
}

/// A `(track, channel)` pair with at least one note.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct SourceId {
    pub track: usize,
    pub channel: u8,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RoleAssignment {
    pub source: SourceId,
    pub role: TrackRole,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct RoleMappingReport {
    pub assignments: Vec<RoleAssignment>,
    pub unassigned: Vec<SourceId>,
}

impl RoleMappingReport {
    pub fn role_of(&self, source: SourceId) -> Option<TrackRole> {
        self.assignments
            .iter()
            .find(|a| a.source == source)
            .map(|a| a.role)
    }
}

#[derive(Clone, Debug)]
struct Source {
    id: SourceId,
    name: Option<String>,
    /// Notes in file ticks; duration may be any positive value.
    notes: Vec<NoteEvent>,
}

impl Source {
    fn mean_pitch(&self) -> f64 {
        self.notes.iter().map(|n| n.pitch as f64).sum::<f64>() / self.notes.len() as f64
    }

    fn max_polyphony(&self) -> usize {
        let mut edges: Vec<(i64, i32)> = self
            .notes
            .iter()
            .flat_map(|n| [(n.start, 1), (n.start + n.duration, -1)])
            .collect();
        // Ends sort before starts at the same tick.
        edges.sort_unstable();
        let (mut cur, mut best) = (0i32, 0i32);
        for (_, d) in edges {
            cur += d;
            best = best.max(cur);
        }
        best as usize
    }
}

/// Reads a file into a song. `mapping` assigns whole tracks (by index) to roles;
/// without it, track names equal to a role name are used first and the pitch
/// heuristic fills the remaining roles.
pub fn midi_to_song(
    bytes: &[u8],
    mapping: Option<&BTreeMap<usize, TrackRole>>,
) -> Result<(Song, RoleMappingReport), MidiError> {
    let doc = MidiDocument::parse(bytes)?;
    let sources = collect_sources(&doc);
    if sources.is_empty() {
        return Err(MidiError::NoMappableTracks);
    }
    let report = match mapping {
        Some(m) => explicit_mapping(&sources, m)?,
        None => heuristic_mapping(&sources),
    };
    if report.assignments.is_empty() {
        return Err(MidiError::NoMappableTracks);
    }
    let mut song = Song::empty(SongMeta::default());
    for a in &report.assignments {
        let src = sources.iter().find(|s| s.id == a.source).unwrap();
        let notes = song.track_mut(a.role);
        for n in &src.notes {
            if let Some(q) = quantize(n, doc.division, a.role == TrackRole::Rhythm) {
                notes.push(q);
            }
        }
    }
    song.sort_tracks();
    validate_song(&song).map_err(MidiError::InvalidSong)?;
    Ok((song, report))
}

fn rescale(ticks: i64, division: u16) -> i64 {
    let d = i64::from(division);
    (ticks * TICKS_PER_QUARTER + d / 2) / d
}

/// Nearest allowed duration; ties go to the longer value.
pub fn snap_duration(ticks: i64) -> i64 {
    let mut best = DURATIONS[0];
    for &d in &DURATIONS[1..] {
        if (ticks - d).abs() <= (ticks - best).abs() {
            best = d;
        }
    }
    best
}

/// Folds General MIDI percussion onto kick, snare and hi-hat.
pub fn map_drum_pitch(pitch: i64) -> i64 {
    match pitch {
        ..=36 => KICK,
        37..=40 => SNARE,
        _ => HIHAT,
    }
}

fn quantize(n: &NoteEvent, division: u16, rhythm: bool) -> Option<NoteEvent> {
    let duration = rescale(n.duration, division);
    if duration < MIN_INGEST_DURATION {
        return None;
    }
    let start = rescale(n.start, division).clamp(0, MAX_START);
    let pitch = if rhythm {
        map_drum_pitch(n.pitch)
    } else {
        n.pitch
    };
    Some(NoteEvent::new(
        pitch,
        snap_duration(duration),
        n.velocity,
        start,
    ))
}

#[derive(Clone, Copy)]
enum NoteMsg {
    On { tick: i64, velocity: i64 },
    Off { tick: i64 },
}

fn collect_sources(doc: &MidiDocument) -> Vec<Source> {
    let mut out = Vec::new();
    for (ti, track) in doc.tracks.iter().enumerate() {
        let explicit_off = track.iter().any(|e| e.status & 0xF0 == 0x80);
        let mut name = None;
        let mut msgs: BTreeMap<(u8, u8), Vec<NoteMsg>> = BTreeMap::new();
        let mut tick = 0i64;
        for ev in track {
            tick += i64::from(ev.delta);
            match ev.status & 0xF0 {
                0xF0 if ev.status == 0xFF && ev.data[0] == 0x03 && name.is_none() => {
                    name = Some(String::from_utf8_lossy(&ev.data[1..]).into_owned());
                }
                0x90 if ev.data[1] > 0 || explicit_off => {
                    msgs.entry((ev.status & 0x0F, ev.data[0]))
                        .or_default()
                        .push(NoteMsg::On {
                            tick,
                            velocity: i64::from(ev.data[1]),
                        });
                }
                0x80 | 0x90 => msgs
                    .entry((ev.status & 0x0F, ev.data[0]))
                    .or_default()
                    .push(NoteMsg::Off { tick }),
                _ => {}
            }
        }
        let mut by_channel: BTreeMap<u8, Vec<NoteEvent>> = BTreeMap::new();
        for ((ch, pitch), seq) in msgs {
            let notes = by_channel.entry(ch).or_default();
            for (start, end, velocity) in pair_notes(&seq, tick, doc.division) {
                if end > start {
                    notes.push(NoteEvent::new(
                        i64::from(pitch),
                        end - start,
                        velocity,
                        start,
                    ));
                }
            }
        }
        for (channel, mut notes) in by_channel {
            if notes.is_empty() {
                continue;
            }
            notes.sort_by_key(NoteEvent::sort_key);
            out.push(Source {
                id: SourceId { track: ti, channel },
                name: name.clone(),
                notes,
            });
        }
    }
    out
}

const PAIRING_BUDGET: usize = 20_000;

/// Pairs note-ons with note-offs for one `(channel, pitch)`.
///
/// Overlapping notes of equal pitch are ambiguous in SMF. The pairing prefers
/// an assignment where every rescaled duration is an allowed value, trying
/// older open notes first; if none exists within the search budget it closes
/// the oldest open note that yields an allowed duration, else the oldest one.
/// Notes still open at the end of the track close there.
fn pair_notes(seq: &[NoteMsg], track_end: i64, division: u16) -> Vec<(i64, i64, i64)> {
    let valid = |start: i64, end: i64| DURATIONS.contains(&rescale(end - start, division));
    let mut pairs = Vec::new();
    let mut open = Vec::new();
    let mut budget = PAIRING_BUDGET;
    if !search(seq, 0, &mut open, &mut pairs, &valid, &mut budget) {
        pairs.clear();
        open.clear();
        for m in seq {
            match *m {
                NoteMsg::On { tick, velocity } => open.push((tick, velocity)),
                NoteMsg::Off { tick } => {
                    if open.is_empty() {
                        continue;
                    }
                    let i = open.iter().position(|&(s, _)| valid(s, tick)).unwrap_or(0);
                    let (s, v) = open.remove(i);
                    pairs.push((s, tick, v));
                }
            }
        }
    }
    pairs.extend(open.into_iter().map(|(s, v)| (s, track_end, v)));
    pairs
}

fn search(
    seq: &[NoteMsg],
    at: usize,
    open: &mut Vec<(i64, i64)>,
    pairs: &mut Vec<(i64, i64, i64)>,
    valid: &impl Fn(i64, i64) -> bool,
    budget: &mut usize,
) -> bool {
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let Some(&msg) = seq.get(at) else { return true };
    match msg {
        NoteMsg::On { tick, velocity } => {
            open.push((tick, velocity));
            if search(seq, at + 1, open, pairs, valid, budget) {
                return true;
            }
            open.pop();
            false
        }
        NoteMsg::Off { .. } if open.is_empty() => search(seq, at + 1, open, pairs, valid, budget),
        NoteMsg::Off { tick } => {
            for i in 0..open.len() {
                if !valid(open[i].0, tick) {
                    continue;
                }
                let (s, v) = open.remove(i);
                pairs.push((s, tick, v));
                if search(seq, at + 1, open, pairs, valid, budget) {
                    return true;
                }
                pairs.pop();
                open.insert(i, (s, v));
                if *budget == 0 {
                    return false;
                }
            }
            false
        }
    }
}

fn explicit_mapping(
    sources: &[Source],
    mapping: &BTreeMap<usize, TrackRole>,
) -> Result<RoleMappingReport, MidiError> {
    let mut owner: BTreeMap<TrackRole, usize> = BTreeMap::new();
    for (&track, &role) in mapping {
        if let Some(prev) = owner.insert(role, track) {
            return Err(MidiError::Mapping(format!(
                "tracks {prev} and {track} both map to {role}"
            )));
        }
    }
    let mut report = RoleMappingReport::default();
    for s in sources {
        match mapping.get(&s.id.track) {
            Some(&role) => report.assignments.push(RoleAssignment {
                source: s.id,
                role,
                reason: "explicit mapping".into(),
            }),
            None => report.unassigned.push(s.id),
        }
    }
    Ok(report)
}

fn role_for_name(name: &str) -> Option<TrackRole> {
    match normalize_label(name).as_str() {
        "drums" | "drum" | "percussion" => Some(TrackRole::Rhythm),
        n => TrackRole::from_name(n),
    }
}

fn heuristic_mapping(sources: &[Source]) -> RoleMappingReport {
    let mut role_of: Vec<Option<(TrackRole, String)>> = vec![None; sources.len()];
    let taken = |role_of: &[Option<(TrackRole, String)>], r: TrackRole| {
        role_of.iter().flatten().any(|(x, _)| *x == r)
    };

    for (i, s) in sources.iter().enumerate() {
        let Some(role) = s.name.as_deref().and_then(role_for_name) else {
            continue;
        };
        if !taken(&role_of, role) {
            role_of[i] = Some((
                role,
                format!("track name {:?}", s.name.as_deref().unwrap_or_default()),
            ));
        }
    }

    let free = |role_of: &[Option<(TrackRole, String)>], drums: bool| -> Vec<usize> {
        (0..sources.len())
            .filter(|&i| role_of[i].is_none() && (sources[i].id.channel == DRUM_CHANNEL) == drums)
            .collect()
    };
    // max_by_key keeps the last maximum; iterate in reverse so ties go to the lowest index.
    let pick_max = |cands: &[usize], key: &dyn Fn(&Source) -> usize| {
        cands
            .iter()
            .rev()
            .copied()
            .max_by_key(|&i| key(&sources[i]))
    };

    if !taken(&role_of, TrackRole::Rhythm) {
        if let Some(i) = pick_max(&free(&role_of, true), &|s| s.notes.len()) {
            role_of[i] = Some((TrackRole::Rhythm, "channel 10, most notes".into()));
        }
    }
    if !taken(&role_of, TrackRole::Bass) {
        let c = free(&role_of, false);
        let lowest = c
            .iter()
            .copied()
            .min_by(|&a, &b| sources[a].mean_pitch().total_cmp(&sources[b].mean_pitch()));
        if let Some(i) = lowest {
            role_of[i] = Some((
                TrackRole::Bass,
                format!("lowest mean pitch {:.1}", sources[i].mean_pitch()),
            ));
        }
    }
    if !taken(&role_of, TrackRole::Chords) {
        if let Some(i) = pick_max(&free(&role_of, false), &|s| s.max_polyphony()) {
            role_of[i] = Some((
                TrackRole::Chords,
                format!("highest polyphony {}", sources[i].max_polyphony()),
            ));
        }
    }
    if !taken(&role_of, TrackRole::Melody) {
        if let Some(i) = pick_max(&free(&role_of, false), &|s| s.notes.len()) {
            role_of[i] = Some((
                TrackRole::Melody,
                format!("most notes among the rest ({})", sources[i].notes.len()),
            ));
        }
    }

    let mut report = RoleMappingReport::default();
    for (s, r) in sources.iter().zip(role_of) {
        match r {
            Some((role, reason)) => report.assignments.push(RoleAssignment {
                source: s.id,
                role,
                reason,
            }),
            None => report.unassigned.push(s.id),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vlq_examples() {
        assert_eq!(encode_vlq(0).unwrap(), [0x00]);
        assert_eq!(encode_vlq(127).unwrap(), [0x7F]);
        assert_eq!(encode_vlq(128).unwrap(), [0x81, 0x00]);
        assert_eq!(encode_vlq(480).unwrap(), [0x83, 0x60]);
        assert_eq!(encode_vlq(0x0FFF_FFFF).unwrap(), [0xFF, 0xFF, 0xFF, 0x7F]);
        assert_eq!(encode_vlq(1 << 28), Err(MidiError::VlqOutOfRange(1 << 28)));
        assert_eq!(decode_vlq(&[0x00]).unwrap(), (0, 1));
        assert_eq!(decode_vlq(&[0x83, 0x60, 0x11]).unwrap(), (480, 2));
        assert_eq!(decode_vlq(&[0xFF; 5]), Err(MidiError::RunawayVlq));
        assert!(matches!(
            decode_vlq(&[0x81]),
            Err(MidiError::TruncatedChunk(_))
        ));
    }

    #[test]
    fn vlq_exhaustive_low_range() {
        for v in 0..(1u32 << 16) {
            let e = encode_vlq(v).unwrap();
            assert_eq!(decode_vlq(&e).unwrap(), (v, e.len()));
        }
    }

    #[test]
    fn snapping_and_drums() {
        assert_eq!(snap_duration(120), 240);
        assert_eq!(snap_duration(359), 240);
        assert_eq!(snap_duration(360), 480);
        assert_eq!(snap_duration(720), 960);
        assert_eq!(snap_duration(5000), 960);
        assert_eq!(
            [35, 36, 37, 40, 41, 42, 49].map(map_drum_pitch),
            [35, 35, 38, 38, 42, 42, 42]
        );
    }

    #[test]
    fn overlapping_same_pitch_pairs_to_allowed_durations() {
        use NoteMsg::*;
        // Notes (0, 960) and (240, 480) share a pitch: on 0, on 240, off 720, off 960.
        let seq = [
            On {
                tick: 0,
                velocity: 1,
            },
            On {
                tick: 240,
                velocity: 2,
            },
            Off { tick: 720 },
            Off { tick: 960 },
        ];
        let mut p = pair_notes(&seq, 960, 480);
        p.sort();
        assert_eq!(p, vec![(0, 960, 1), (240, 720, 2)]);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            MidiDocument::parse(b"RIFF\0\0\0\x06\0\x01\0\x01\x01\xE0"),
            Err(MidiError::BadHeader(_))
        ));
        assert_eq!(
            MidiDocument::parse(b"MThd\0\0\0\x06\0\x01\0\x01\xE7\x28"),
            Err(MidiError::UnsupportedDivision(0xE728))
        );
        assert!(matches!(
            MidiDocument::parse(b"MThd\0\0\0\x06\0\x01\0\x01\x01\xE0MTrk\0\0\0\x10\0\xFF"),
            Err(MidiError::TruncatedChunk(_))
        ));
    }
}
