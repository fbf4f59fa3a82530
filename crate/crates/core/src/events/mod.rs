//! Event-camera measurement model: eventstreams, quantized log-brightness
//! change frames, event counting, event generation, and stream utilities.

mod frame;
mod generate;
mod stream;

pub use frame::{count_events, count_for, events_to_delta_l, DeltaLFrame, EventCountFrame, MagnitudeFilter};
pub use generate::{generate_events, EventGenerator};
pub use stream::{halve_windows, slice_stream, sync_offset, sync_offset_with, uniform_edges};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    pub fn from_sign(p: i8) -> Option<Self> {
        match p {
            -1 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }
}

/// A single brightness-change record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: f64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

/// Signed contrast thresholds. `c_pos > 0`, `c_neg < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds<T = f64> {
    pub c_pos: T,
    pub c_neg: T,
}

impl<T: Scalar> Thresholds<T> {
    pub fn new(c_pos: T, c_neg: T) -> Result<Self> {
        if !(c_pos > T::zero()) || !c_pos.is_finite() {
            return Err(Error::Argument(format!("c_pos must be > 0, got {c_pos}")));
        }
        if !(c_neg < T::zero()) || !c_neg.is_finite() {
            return Err(Error::Argument(format!("c_neg must be < 0, got {c_neg}")));
        }
        Ok(Self { c_pos, c_neg })
    }

    /// Symmetric thresholds `(+c, -c)`.
    pub fn symmetric(c: T) -> Result<Self> {
        Self::new(c, -c)
    }

    pub fn for_polarity(&self, p: Polarity) -> T {
        match p {
            Polarity::Positive => self.c_pos,
            Polarity::Negative => self.c_neg,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Thresholds<U> {
        Thresholds {
            c_pos: U::lit(self.c_pos.as_f64()),
            c_neg: U::lit(self.c_neg.as_f64()),
        }
    }
}

impl Default for Thresholds<f64> {
    fn default() -> Self {
        Self {
            c_pos: 0.2,
            c_neg: -0.2,
        }
    }
}

/// Time-ordered events from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    events: Vec<Event>,
    width: u32,
    height: u32,
    thresholds: Thresholds,
}

impl EventStream {
    /// Validates ordering and coordinates.
    pub fn new(events: Vec<Event>, width: u32, height: u32, thresholds: Thresholds) -> Result<Self> {
        validate_events(&events, width, height)?;
        Ok(Self {
            events,
            width,
            height,
            thresholds,
        })
    }

    pub fn empty(width: u32, height: u32, thresholds: Thresholds) -> Self {
        Self {
            events: Vec::new(),
            width,
            height,
            thresholds,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    /// `(first t, last t)`, `None` when empty.
    pub fn time_span(&self) -> Option<(f64, f64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }

    /// Copy of the events within `[t0, t1)` as a stream of its own.
    pub fn window(&self, t0: f64, t1: f64) -> EventStream {
        let lo = self.events.partition_point(|e| e.t < t0);
        let hi = self.events.partition_point(|e| e.t < t1);
        EventStream {
            events: self.events[lo..hi.max(lo)].to_vec(),
            width: self.width,
            height: self.height,
            thresholds: self.thresholds,
        }
    }
}

pub(crate) fn validate_events(events: &[Event], width: u32, height: u32) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        check_coord(e, width, height)?;
        if !e.t.is_finite() || e.t < 0.0 {
            return Err(Error::format(i as u64, format!("event {i} has invalid time {}", e.t)));
        }
        if e.t < prev {
            return Err(Error::format(i as u64, format!("event {i} breaks time ordering")));
        }
        prev = e.t;
    }
    Ok(())
}

#[inline]
pub(crate) fn check_coord(e: &Event, width: u32, height: u32) -> Result<()> {
    if u32::from(e.x) >= width || u32::from(e.y) >= height {
        return Err(Error::Coordinate {
            x: e.x.into(),
            y: e.y.into(),
            width,
            height,
        });
    }
    Ok(())
}
