//! Binary piano-roll tensors and PNG rendering.

use std::io::BufWriter;
use std::path::Path;

use crate::music::{Song, TrackRole, MAX_START};

pub const TICKS_PER_STEP: i64 = 60;
pub const STEPS: usize = 128;
pub const PITCHES: usize = 128;
pub const CHANNELS: usize = 4;
pub const PHRASE_STEPS: usize = 64;
/// Pixels per cell edge in rendered images.
pub const CELL_PX: u32 = 4;

/// Time step of a tick, or `None` at and beyond the end of the song span.
pub fn tick_to_step(tick: i64) -> Option<usize> {
    if (0..MAX_START).contains(&tick) {
        Some((tick / TICKS_PER_STEP) as usize)
    } else {
        None
    }
}

/// `[channel][time][pitch]` occupancy, channels in [`TrackRole::ALL`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RollTensor {
    data: Vec<u8>,
}

impl Default for RollTensor {
    fn default() -> Self {
        Self {
            data: vec![0; CHANNELS * STEPS * PITCHES],
        }
    }
}

impl RollTensor {
    pub fn get(&self, channel: usize, step: usize, pitch: usize) -> u8 {
        self.data[(channel * STEPS + step) * PITCHES + pitch]
    }

    pub fn set(&mut self, channel: usize, step: usize, pitch: usize) {
        self.data[(channel * STEPS + step) * PITCHES + pitch] = 1;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&x| x as usize).sum()
    }

    pub fn channel(&self, role: TrackRole) -> &[u8] {
        let c = role.index() * STEPS * PITCHES;
        &self.data[c..c + STEPS * PITCHES]
    }
}

/// `[time][pitch]` occupancy of one half of the melody.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhraseRoll {
    data: Vec<u8>,
}

impl Default for PhraseRoll {
    fn default() -> Self {
        Self {
            data: vec![0; PHRASE_STEPS * PITCHES],
        }
    }
}

impl PhraseRoll {
    /// Builds a roll from 8192 cells; any nonzero cell counts as active.
    pub fn from_cells(cells: &[u8]) -> Option<Self> {
        (cells.len() == PHRASE_STEPS * PITCHES).then(|| Self {
            data: cells.iter().map(|&c| u8::from(c != 0)).collect(),
        })
    }

    pub fn get(&self, step: usize, pitch: usize) -> u8 {
        self.data[step * PITCHES + pitch]
    }

    pub fn set(&mut self, step: usize, pitch: usize) {
        self.data[step * PITCHES + pitch] = 1;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&c| c == 0)
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&c| f32::from(c)).collect()
    }
}

pub fn song_to_roll(song: &Song) -> RollTensor {
    let mut roll = RollTensor::default();
    for role in TrackRole::ALL {
        for n in song.track(role) {
            let Some(first) = tick_to_step(n.start) else {
                continue;
            };
            let len = (n.duration / TICKS_PER_STEP) as usize;
            for t in first..(first + len).min(STEPS) {
                roll.set(role.index(), t, n.pitch as usize);
            }
        }
    }
    roll
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SkipReason {
    #[error("one melody half has no active cell")]
    EmptyHalf,
}

/// Splits the melody channel at step 64 into (first half, second half).
pub fn melody_phrases(song: &Song) -> Result<(PhraseRoll, PhraseRoll), SkipReason> {
    split_melody(&song_to_roll(song))
}

pub fn split_melody(roll: &RollTensor) -> Result<(PhraseRoll, PhraseRoll), SkipReason> {
    let m = roll.channel(TrackRole::Melody);
    let half = PHRASE_STEPS * PITCHES;
    let source = PhraseRoll {
        data: m[..half].to_vec(),
    };
    let target = PhraseRoll {
        data: m[half..].to_vec(),
    };
    if source.is_empty() || target.is_empty() {
        return Err(SkipReason::EmptyHalf);
    }
    Ok((source, target))
}

const BACKGROUND: [u8; 3] = [16, 16, 24];
const COLORS: [[u8; 3]; CHANNELS] = [
    [230, 80, 70],
    [80, 200, 110],
    [70, 130, 230],
    [240, 200, 60],
];

/// Anything renderable: a stack of `[time][pitch]` planes.
pub trait Roll {
    fn planes(&self) -> Vec<&[u8]>;
    fn steps(&self) -> usize;
}

impl Roll for RollTensor {
    fn planes(&self) -> Vec<&[u8]> {
        TrackRole::ALL.iter().map(|&r| self.channel(r)).collect()
    }
    fn steps(&self) -> usize {
        STEPS
    }
}

impl Roll for PhraseRoll {
    fn planes(&self) -> Vec<&[u8]> {
        vec![&self.data]
    }
    fn steps(&self) -> usize {
        PHRASE_STEPS
    }
}

/// RGB pixels, time on x and pitch on y with high pitches at the top. Where
/// channels overlap the later channel's colour wins.
pub fn rasterize(roll: &impl Roll) -> (u32, u32, Vec<u8>) {
    let (w, h) = (roll.steps() as u32 * CELL_PX, PITCHES as u32 * CELL_PX);
    let mut px: Vec<u8> = BACKGROUND.repeat((w * h) as usize);
    for (c, plane) in roll.planes().into_iter().enumerate() {
        for t in 0..roll.steps() {
            for p in 0..PITCHES {
                if plane[t * PITCHES + p] == 0 {
                    continue;
                }
                let (x0, y0) = (t as u32 * CELL_PX, (PITCHES - 1 - p) as u32 * CELL_PX);
                for y in y0..y0 + CELL_PX {
                    for x in x0..x0 + CELL_PX {
                        let i = ((y * w + x) * 3) as usize;
                        px[i..i + 3].copy_from_slice(&COLORS[c]);
                    }
                }
            }
        }
    }
    (w, h, px)
}

pub fn render_png_bytes(roll: &impl Roll) -> Vec<u8> {
    let (w, h, px) = rasterize(roll);
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(&px).expect("in-memory PNG data");
    }
    out
}

pub fn render_roll(roll: &impl Roll, path: impl AsRef<Path>) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&render_png_bytes(roll))?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::music::{NoteEvent, SongMeta, HIHAT};

    #[test]
    fn step_examples() {
        assert_eq!(tick_to_step(0), Some(0));
        assert_eq!(tick_to_step(480), Some(8));
        assert_eq!(tick_to_step(7679), Some(127));
        assert_eq!(tick_to_step(7680), None);
    }

    #[test]
    fn roll_examples() {
        let mut s = Song::empty(SongMeta::default());
        s.track_mut(TrackRole::Melody)
            .push(NoteEvent::new(60, 480, 90, 0));
        s.track_mut(TrackRole::Rhythm)
            .push(NoteEvent::new(HIHAT, 240, 100, 7560));
        let r = song_to_roll(&s);
        for t in 0..8 {
            assert_eq!(r.get(0, t, 60), 1);
        }
        assert_eq!(r.get(0, 8, 60), 0);
        assert_eq!((r.get(3, 126, 42), r.get(3, 127, 42)), (1, 1));
        assert_eq!(r.count(), 10);
    }

    #[test]
    fn phrase_example() {
        let mut s = Song::empty(SongMeta::default());
        s.track_mut(TrackRole::Melody).extend([
            NoteEvent::new(60, 480, 90, 0),
            NoteEvent::new(62, 480, 90, 3840),
        ]);
        let (src, tgt) = melody_phrases(&s).unwrap();
        assert!((0..8).all(|t| src.get(t, 60) == 1 && tgt.get(t, 62) == 1));
        assert_eq!(src.data().iter().map(|&c| c as usize).sum::<usize>(), 8);
        assert_eq!(tgt.data().iter().map(|&c| c as usize).sum::<usize>(), 8);

        s.track_mut(TrackRole::Melody).pop();
        assert_eq!(melody_phrases(&s), Err(SkipReason::EmptyHalf));
    }

    #[test]
    fn render_is_deterministic_and_blocky() {
        let empty = RollTensor::default();
        let (_, _, px) = rasterize(&empty);
        assert!(px.chunks(3).all(|c| c == BACKGROUND));

        let mut one = PhraseRoll::default();
        one.set(3, 100);
        let (w, _, px) = rasterize(&one);
        let lit: Vec<(u32, u32)> = px
            .chunks(3)
            .enumerate()
            .filter(|(_, c)| *c != BACKGROUND)
            .map(|(i, _)| (i as u32 % w, i as u32 / w))
            .collect();
        assert_eq!(lit.len(), (CELL_PX * CELL_PX) as usize);
        assert!(lit
            .iter()
            .all(|&(x, y)| x / CELL_PX == 3 && y / CELL_PX == 27));
        assert_eq!(render_png_bytes(&one), render_png_bytes(&one.clone()));
    }
}
