//! Raster codecs: 16-bit PGM intensity frames and red/blue event-frame PNGs.

use crate::error::{Error, Result};
use crate::events::EventCountFrame;
use std::path::Path;

/// Binary 16-bit PGM (`P5`, maxval 65535). Intensities are clamped to
/// `[0, 1]` and scaled.
pub fn encode_pgm16(values: &[f64], width: u32, height: u32) -> Result<Vec<u8>> {
    if values.len() != (width * height) as usize {
        return Err(Error::Shape(format!("{} values for a {width}x{height} frame", values.len())));
    }
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

/// Returns `(values in [0,1], width, height)`.
pub fn decode_pgm16(bytes: &[u8]) -> Result<(Vec<f64>, u32, u32)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "truncated PGM header"));
        }
        fields.push((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("")));
    }
    if fields[0].1 != "P5" {
        return Err(Error::format(0, "not a binary PGM"));
    }
    let num = |i: usize| -> Result<u32> {
        fields[i]
            .1
            .parse()
            .map_err(|_| Error::format(fields[i].0 as u64, "bad PGM header number"))
    };
    let (w, h, maxval) = (num(1)?, num(2)?, num(3)?);
    if maxval != 65535 {
        return Err(Error::format(fields[3].0 as u64, format!("expected maxval 65535, got {maxval}")));
    }
    pos += 1;
    let need = 2 * w as usize * h as usize;
    if bytes.len() < pos + need {
        return Err(Error::format(bytes.len() as u64, "truncated PGM pixel data"));
    }
    let values = bytes[pos..pos + need]
        .chunks_exact(2)
        .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / 65535.0)
        .collect();
    Ok((values, w, h))
}

pub fn write_pgm16(path: impl AsRef<Path>, values: &[f64], width: u32, height: u32) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm16(values, width, height)?).map_err(|e| Error::io(path, e))
}

pub fn read_pgm16(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32, u32)> {
    let path = path.as_ref();
    decode_pgm16(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Default saturation count for event-frame images.
pub const DEFAULT_EVENT_CAP: u32 = 8;

/// RGB8 event image: positive counts in red, negative in blue, intensity
/// `min(|n|, cap) / cap`. Counts up to `cap` survive a decode when
/// `cap <= 255`.
pub fn event_frame_rgb(counts: &EventCountFrame, cap: u32) -> Vec<u8> {
    let cap = cap.max(1);
    let mut rgb = vec![0u8; counts.counts.len() * 3];
    for (i, &c) in counts.counts.iter().enumerate() {
        let level = (255.0 * f64::from(c.unsigned_abs().min(cap)) / f64::from(cap)).round() as u8;
        if c > 0 {
            rgb[3 * i] = level;
        } else if c < 0 {
            rgb[3 * i + 2] = level;
        }
    }
    rgb
}

/// Inverse of [`event_frame_rgb`].
pub fn counts_from_rgb(rgb: &[u8], cap: u32) -> Vec<i32> {
    let cap = f64::from(cap.max(1));
    rgb.chunks_exact(3)
        .map(|p| {
            let r = (f64::from(p[0]) * cap / 255.0).round() as i32;
            let b = (f64::from(p[2]) * cap / 255.0).round() as i32;
            r - b
        })
        .collect()
}

pub fn write_event_png(path: impl AsRef<Path>, counts: &EventCountFrame, cap: u32) -> Result<()> {
    let path = path.as_ref();
    let rgb = event_frame_rgb(counts, cap);
    image::save_buffer(path, &rgb, counts.width as u32, counts.height as u32, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Returns `(rgb, width, height)`.
pub fn read_png_rgb(path: impl AsRef<Path>) -> Result<(Vec<u8>, u32, u32)> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    Ok((rgb.into_raw(), w, h))
}

/// Grayscale PNG of an intensity image in `[0, 1]`.
pub fn write_intensity_png(path: impl AsRef<Path>, values: &[f64], width: u32, height: u32) -> Result<()> {
    let path = path.as_ref();
    let px: Vec<u8> = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    image::save_buffer(path, &px, width, height, image::ExtendedColorType::L8)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}
