//! Binary recording container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8  b"EVGZREC1"
//! sensor_width     2
//! sensor_height    2
//! event_count      8
//! frame_count      8
//! 3 × section      8 offset + 8 length + 4 crc32   (events, frames, index)
//! ```
//!
//! The events section is `event_count` 16-byte records
//! `t:u64 x:u16 y:u16 polarity:i8 pad:u8 pad:u16`; the frames section is
//! concatenated canonical P5 PGM blobs; the index section is `frame_count`
//! records `t:u64 offset:u64 length:u64` with offsets relative to the
//! frames section. Serialization is canonical, so an unmodified recording
//! re-serializes byte-exactly.

use std::path::Path;

use super::pgm;
use super::IoError;
use crate::model::{Event, Frame};

const MAGIC: &[u8; 8] = b"EVGZREC1";
const HEADER_LEN: usize = 8 + 2 + 2 + 8 + 8 + 3 * 20;
pub(crate) const EVENT_RECORD_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Recording {
    pub sensor_width: u16,
    pub sensor_height: u16,
    pub events: Vec<Event>,
    pub frames: Vec<Frame>,
}

impl Recording {
    pub fn validate(&self) -> Result<(), IoError> {
        for (i, pair) in self.events.windows(2).enumerate() {
            if pair[1].t < pair[0].t {
                return Err(IoError::OutOfOrderTimestamp { stream: "event", index: i + 1 });
            }
        }
        for (i, pair) in self.frames.windows(2).enumerate() {
            if pair[1].t < pair[0].t {
                return Err(IoError::OutOfOrderTimestamp { stream: "frame", index: i + 1 });
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if e.polarity != 1 && e.polarity != -1 {
                return Err(IoError::MalformedRecord {
                    stream: "event",
                    index: i,
                    reason: format!("polarity {}", e.polarity),
                });
            }
            if e.x >= self.sensor_width || e.y >= self.sensor_height {
                return Err(IoError::MalformedRecord {
                    stream: "event",
                    index: i,
                    reason: format!("pixel ({}, {}) outside sensor", e.x, e.y),
                });
            }
        }
        Ok(())
    }
}

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serializes into the canonical container byte layout.
pub fn serialize_recording(rec: &Recording) -> Result<Vec<u8>, IoError> {
    rec.validate()?;

    let mut events = Vec::with_capacity(rec.events.len() * EVENT_RECORD_LEN);
    for e in &rec.events {
        put_u64(&mut events, e.t);
        put_u16(&mut events, e.x);
        put_u16(&mut events, e.y);
        events.push(e.polarity as u8);
        events.push(0);
        put_u16(&mut events, 0);
    }

    let mut frames = Vec::new();
    let mut index = Vec::with_capacity(rec.frames.len() * 24);
    for f in &rec.frames {
        let blob = pgm::write_pgm(f);
        put_u64(&mut index, f.t);
        put_u64(&mut index, frames.len() as u64);
        put_u64(&mut index, blob.len() as u64);
        frames.extend_from_slice(&blob);
    }

    let events_offset = HEADER_LEN as u64;
    let frames_offset = events_offset + events.len() as u64;
    let index_offset = frames_offset + frames.len() as u64;

    let mut out = Vec::with_capacity(HEADER_LEN + events.len() + frames.len() + index.len());
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, rec.sensor_width);
    put_u16(&mut out, rec.sensor_height);
    put_u64(&mut out, rec.events.len() as u64);
    put_u64(&mut out, rec.frames.len() as u64);
    for (offset, payload) in [
        (events_offset, &events),
        (frames_offset, &frames),
        (index_offset, &index),
    ] {
        put_u64(&mut out, offset);
        put_u64(&mut out, payload.len() as u64);
        put_u32(&mut out, crc32fast::hash(payload));
    }
    debug_assert_eq!(out.len(), HEADER_LEN);
    out.extend_from_slice(&events);
    out.extend_from_slice(&frames);
    out.extend_from_slice(&index);
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.data.len() {
            return Err(IoError::MalformedHeader {
                offset: self.pos as u64,
                reason: format!("truncated while reading {}", what),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, IoError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn section<'a>(
    data: &'a [u8],
    name: &'static str,
    offset: u64,
    len: u64,
    crc: u32,
) -> Result<&'a [u8], IoError> {
    let (offset, len) = (offset as usize, len as usize);
    if offset + len > data.len() || offset < HEADER_LEN {
        return Err(IoError::MalformedHeader {
            offset: offset as u64,
            reason: format!("section '{}' extends past end of file", name),
        });
    }
    let payload = &data[offset..offset + len];
    if crc32fast::hash(payload) != crc {
        return Err(IoError::ChecksumMismatch { section: name });
    }
    Ok(payload)
}

/// Parses a container from bytes.
pub fn parse_recording(data: &[u8]) -> Result<Recording, IoError> {
    let mut cur = Cursor { data, pos: 0 };
    let magic = cur.take(8, "magic")?;
    if magic != MAGIC {
        return Err(IoError::MalformedHeader { offset: 0, reason: "bad magic".into() });
    }
    let sensor_width = cur.u16("sensor width")?;
    let sensor_height = cur.u16("sensor height")?;
    let event_count = cur.u64("event count")? as usize;
    let frame_count = cur.u64("frame count")? as usize;
    let mut sections = [(0u64, 0u64, 0u32); 3];
    for s in &mut sections {
        s.0 = cur.u64("section offset")?;
        s.1 = cur.u64("section length")?;
        s.2 = cur.u32("section crc")?;
    }

    let events_raw = section(data, "events", sections[0].0, sections[0].1, sections[0].2)?;
    let frames_raw = section(data, "frames", sections[1].0, sections[1].1, sections[1].2)?;
    let index_raw = section(data, "index", sections[2].0, sections[2].1, sections[2].2)?;

    if events_raw.len() != event_count * EVENT_RECORD_LEN {
        return Err(IoError::MalformedHeader {
            offset: sections[0].0,
            reason: format!(
                "events section length {} does not match count {}",
                events_raw.len(),
                event_count
            ),
        });
    }
    if index_raw.len() != frame_count * 24 {
        return Err(IoError::MalformedHeader {
            offset: sections[2].0,
            reason: format!(
                "index section length {} does not match count {}",
                index_raw.len(),
                frame_count
            ),
        });
    }

    let mut events = Vec::with_capacity(event_count);
    let mut last_t = 0u64;
    for (i, rec) in events_raw.chunks_exact(EVENT_RECORD_LEN).enumerate() {
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let polarity = rec[12] as i8;
        if polarity != 1 && polarity != -1 {
            return Err(IoError::MalformedRecord {
                stream: "event",
                index: i,
                reason: format!("polarity {}", polarity),
            });
        }
        if x >= sensor_width || y >= sensor_height {
            return Err(IoError::MalformedRecord {
                stream: "event",
                index: i,
                reason: format!("pixel ({}, {}) outside sensor", x, y),
            });
        }
        if i > 0 && t < last_t {
            return Err(IoError::OutOfOrderTimestamp { stream: "event", index: i });
        }
        last_t = t;
        events.push(Event { t, x, y, polarity });
    }

    let mut frames = Vec::with_capacity(frame_count);
    let mut last_ft = 0u64;
    for (i, rec) in index_raw.chunks_exact(24).enumerate() {
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let offset = u64::from_le_bytes(rec[8..16].try_into().unwrap()) as usize;
        let len = u64::from_le_bytes(rec[16..24].try_into().unwrap()) as usize;
        if offset + len > frames_raw.len() {
            return Err(IoError::MalformedRecord {
                stream: "frame",
                index: i,
                reason: "frame blob extends past frames section".into(),
            });
        }
        if i > 0 && t < last_ft {
            return Err(IoError::OutOfOrderTimestamp { stream: "frame", index: i });
        }
        last_ft = t;
        let frame = pgm::read_pgm(&frames_raw[offset..offset + len], t).map_err(|reason| {
            IoError::MalformedRecord { stream: "frame", index: i, reason }
        })?;
        frames.push(frame);
    }

    Ok(Recording { sensor_width, sensor_height, events, frames })
}

pub fn write_recording(path: &Path, rec: &Recording) -> Result<(), IoError> {
    let bytes = serialize_recording(rec)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_recording(path: &Path) -> Result<Recording, IoError> {
    let data = std::fs::read(path)?;
    parse_recording(&data)
}
