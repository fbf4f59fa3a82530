//! Plain-text `t,x,y,p` eventstreams. A header row is optional.

use crate::error::{Error, Result};
use crate::events::{Event, EventStream, Polarity, Thresholds};
use std::path::Path;

pub fn parse_events_csv(text: &str, width: u32, height: u32, thresholds: Thresholds) -> Result<EventStream> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut events = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(i as u64, e.to_string()))?;
        let offset = rec.position().map_or(i as u64, |p| p.byte());
        if rec.len() != 4 {
            return Err(Error::format(offset, format!("line {}: expected 4 fields, got {}", i + 1, rec.len())));
        }
        if i == 0 && rec[0].parse::<f64>().is_err() {
            continue;
        }
        let bad = |what: &str| Error::format(offset, format!("line {}: bad {what}", i + 1));
        let t: f64 = rec[0].parse().map_err(|_| bad("timestamp"))?;
        let x: u16 = rec[1].parse().map_err(|_| bad("x"))?;
        let y: u16 = rec[2].parse().map_err(|_| bad("y"))?;
        let p = match &rec[3] {
            "1" | "+1" => Polarity::Positive,
            "-1" | "0" => Polarity::Negative,
            _ => return Err(bad("polarity")),
        };
        events.push(Event::new(t, x, y, p));
    }
    EventStream::new(events, width, height, thresholds)
}

pub fn read_events_csv(path: impl AsRef<Path>, width: u32, height: u32, thresholds: Thresholds) -> Result<EventStream> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events_csv(&text, width, height, thresholds)
}

/// `t` is written with Rust's shortest round-trip formatting.
pub fn format_events_csv(stream: &EventStream) -> String {
    let mut out = String::from("t,x,y,p\n");
    for e in stream.events() {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.p.sign()));
    }
    out
}
