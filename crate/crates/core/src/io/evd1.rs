//! `EVD1` binary eventstreams.
//!
//! Little-endian. A 36-byte header `{"EVD1", u32 width, u32 height,
//! f64 c_pos, f64 c_neg, u64 count}` is followed by `count` 16-byte
//! records `{f64 t, u16 x, u16 y, i8 p, 3 zero bytes}`.

use crate::error::{Error, Result};
use crate::events::{Event, EventStream, Polarity, Thresholds};
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"EVD1";
pub const HEADER_LEN: usize = 36;
pub const RECORD_LEN: usize = 16;

pub fn encode_events(stream: &EventStream) -> Vec<u8> {
    let (w, h) = stream.resolution();
    let th = stream.thresholds();
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&th.c_pos.to_le_bytes());
    out.extend_from_slice(&th.c_neg.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in stream.events() {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p.sign() as u8);
        out.extend_from_slice(&[0, 0, 0]);
    }
    out
}

fn field<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().expect("length checked by caller")
}

pub fn decode_events(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file is {} bytes, shorter than the {HEADER_LEN}-byte header", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected EVD1"));
    }
    let width = u32::from_le_bytes(field(bytes, 4));
    let height = u32::from_le_bytes(field(bytes, 8));
    let c_pos = f64::from_le_bytes(field(bytes, 12));
    let c_neg = f64::from_le_bytes(field(bytes, 20));
    let count = u64::from_le_bytes(field(bytes, 28));
    let thresholds = Thresholds::new(c_pos, c_neg).map_err(|e| Error::format(12, e.to_string()))?;
    let body = (bytes.len() - HEADER_LEN) as u64;
    let available = body / RECORD_LEN as u64;
    if available < count {
        return Err(Error::format(
            HEADER_LEN as u64 + available * RECORD_LEN as u64,
            format!("truncated: record {available} of {count} is incomplete or missing"),
        ));
    }
    if body != count * RECORD_LEN as u64 {
        return Err(Error::format(
            HEADER_LEN as u64 + count * RECORD_LEN as u64,
            format!("{} trailing bytes after {count} records", body - count * RECORD_LEN as u64),
        ));
    }
    let mut events = Vec::with_capacity(count as usize);
    let mut prev = f64::NEG_INFINITY;
    for i in 0..count as usize {
        let at = HEADER_LEN + i * RECORD_LEN;
        let off = at as u64;
        let t = f64::from_le_bytes(field(bytes, at));
        let x = u16::from_le_bytes(field(bytes, at + 8));
        let y = u16::from_le_bytes(field(bytes, at + 10));
        let p = bytes[at + 12] as i8;
        if bytes[at + 13..at + 16] != [0, 0, 0] {
            return Err(Error::format(off + 13, format!("record {i}: non-zero padding")));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::format(off, format!("record {i}: invalid timestamp {t}")));
        }
        if t < prev {
            return Err(Error::format(off, format!("record {i}: timestamps out of order")));
        }
        if u32::from(x) >= width || u32::from(y) >= height {
            return Err(Error::format(
                off + 8,
                format!("record {i}: coordinate ({x}, {y}) overflows {width}x{height}"),
            ));
        }
        let p = Polarity::from_sign(p).ok_or_else(|| Error::format(off + 12, format!("record {i}: polarity {p}")))?;
        prev = t;
        events.push(Event::new(t, x, y, p));
    }
    EventStream::new(events, width, height, thresholds)
}

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_events(stream)).map_err(|e| Error::io(path, e))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_events(&bytes)
}
