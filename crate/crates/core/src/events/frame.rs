use super::{check_coord, Event, Polarity, Thresholds};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-pixel log-brightness change over a half-open time window.
/// Row-major, `values[y * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaLFrame<T = f64> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    pub window: (f64, f64),
}

impl<T: Scalar> DeltaLFrame<T> {
    pub fn zeros(width: usize, height: usize, window: (f64, f64)) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
            window,
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<T>, window: (f64, f64)) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} frame",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            window,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    /// Elementwise sum, used to merge sibling windows.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape("frame sizes differ".into()));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect(),
            window: (self.window.0.min(other.window.0), self.window.1.max(other.window.1)),
        })
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|v| !v.is_zero()).count()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn cast<U: Scalar>(&self) -> DeltaLFrame<U> {
        DeltaLFrame {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            window: self.window,
        }
    }
}

/// Signed per-pixel event counts over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCountFrame {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<i32>,
    pub window: (f64, f64),
}

impl EventCountFrame {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.counts[y * self.width + x]
    }

    /// Net signed count per pixel straight from raw events.
    pub fn from_events(events: &[Event], width: usize, height: usize, window: (f64, f64)) -> Result<Self> {
        let mut counts = vec![0i32; width * height];
        for e in events {
            check_coord(e, width as u32, height as u32)?;
            counts[e.y as usize * width + e.x as usize] += i32::from(e.p.sign());
        }
        Ok(Self {
            width,
            height,
            counts,
            window,
        })
    }
}

/// Converts a batch of events into the quantized log-brightness change
/// `c_pos * n_pos + c_neg * n_neg` per pixel.
///
/// Events must be time-sorted and fall inside `window = [t0, t1)`.
pub fn events_to_delta_l<T: Scalar>(
    events: &[Event],
    thresholds: Thresholds<T>,
    resolution: (usize, usize),
    window: (f64, f64),
) -> Result<DeltaLFrame<T>> {
    let (width, height) = resolution;
    if !(window.0 < window.1) {
        return Err(Error::Window(format!("[{}, {}) is empty", window.0, window.1)));
    }
    let mut pos = vec![0u32; width * height];
    let mut neg = vec![0u32; width * height];
    let mut prev = f64::NEG_INFINITY;
    for (i, e) in events.iter().enumerate() {
        check_coord(e, width as u32, height as u32)?;
        if e.t < prev || e.t.is_nan() {
            return Err(Error::format(i as u64, format!("event {i} breaks time ordering")));
        }
        if e.t < window.0 || e.t >= window.1 {
            return Err(Error::Window(format!(
                "event {i} at t={} outside [{}, {})",
                e.t, window.0, window.1
            )));
        }
        prev = e.t;
        let idx = e.y as usize * width + e.x as usize;
        match e.p {
            Polarity::Positive => pos[idx] += 1,
            Polarity::Negative => neg[idx] += 1,
        }
    }
    let values = pos
        .iter()
        .zip(&neg)
        .map(|(&np, &nn)| match (np, nn) {
            (0, 0) => T::zero(),
            (np, 0) => thresholds.c_pos * T::lit(np as f64),
            (0, nn) => thresholds.c_neg * T::lit(nn as f64),
            (np, nn) => thresholds.c_pos * T::lit(np as f64) + thresholds.c_neg * T::lit(nn as f64),
        })
        .collect();
    Ok(DeltaLFrame {
        width,
        height,
        values,
        window,
    })
}

/// Number of events a log-brightness change implies, truncated toward
/// zero for both polarities. Quotients within `T::SNAP` of an integer
/// snap to it, so frames built from events count back exactly.
#[inline]
pub fn count_for<T: Scalar>(delta_l: T, thresholds: &Thresholds<T>) -> i32 {
    if !delta_l.is_finite() {
        return 0;
    }
    let q = if delta_l >= T::zero() {
        delta_l / thresholds.c_pos
    } else {
        -(delta_l.abs() / thresholds.c_neg.abs())
    };
    let r = q.round();
    let n = if (q - r).abs() <= T::SNAP * T::one().max(r.abs()) {
        r
    } else {
        q.trunc()
    };
    n.to_i32().unwrap_or(if n > T::zero() { i32::MAX } else { i32::MIN })
}

pub fn count_events<T: Scalar>(delta_l: &DeltaLFrame<T>, thresholds: &Thresholds<T>) -> EventCountFrame {
    EventCountFrame {
        width: delta_l.width,
        height: delta_l.height,
        counts: delta_l.values.iter().map(|&v| count_for(v, thresholds)).collect(),
        window: delta_l.window,
    }
}

/// Zeroes entries whose magnitude is below a threshold.
pub trait MagnitudeFilter: Sized {
    type Magnitude;

    fn filter_magnitude(&self, min_magnitude: Self::Magnitude) -> Self;
}

impl<T: Scalar> MagnitudeFilter for DeltaLFrame<T> {
    type Magnitude = T;

    fn filter_magnitude(&self, min_magnitude: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            if v.abs() < min_magnitude {
                *v = T::zero();
            }
        }
        out
    }
}

impl MagnitudeFilter for EventCountFrame {
    type Magnitude = u32;

    fn filter_magnitude(&self, min_magnitude: u32) -> Self {
        let mut out = self.clone();
        for c in &mut out.counts {
            if c.unsigned_abs() < min_magnitude {
                *c = 0;
            }
        }
        out
    }
}
