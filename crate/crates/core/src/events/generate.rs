use super::{Event, Polarity, Thresholds};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Emits the events a pixel array produces while its log-brightness moves
/// linearly from `logl_prev` (at `t_prev`) to `logl_next` (at `t_next`).
///
/// `ref_level` holds each pixel's brightness at its last event and is
/// advanced in place, so residual change carries into the next interval.
/// Returned events are sorted by time; ties keep row-major pixel order.
pub fn generate_events<T: Scalar>(
    logl_prev: &[T],
    logl_next: &[T],
    ref_level: &mut [T],
    thresholds: &Thresholds<T>,
    width: usize,
    (t_prev, t_next): (f64, f64),
) -> Result<Vec<Event>> {
    if !(t_next > t_prev) {
        return Err(Error::Window(format!("t_next {t_next} must exceed t_prev {t_prev}")));
    }
    let n = logl_prev.len();
    if logl_next.len() != n || ref_level.len() != n || width == 0 || n % width != 0 {
        return Err(Error::Format {
            offset: 0,
            message: format!(
                "log-brightness arrays disagree: {} / {} / {} with width {width}",
                n,
                logl_next.len(),
                ref_level.len()
            ),
        });
    }
    if width > usize::from(u16::MAX) + 1 || n / width > usize::from(u16::MAX) + 1 {
        return Err(Error::Argument("resolution exceeds 16-bit coordinates".into()));
    }
    let dt = t_next - t_prev;
    let mut out = Vec::new();
    for i in 0..n {
        let (l0, l1) = (logl_prev[i], logl_next[i]);
        let slope = l1 - l0;
        let (x, y) = ((i % width) as u16, (i / width) as u16);
        let r = &mut ref_level[i];
        let crossing_time = |level: T| {
            let frac = ((level - l0) / slope).as_f64().clamp(0.0, 1.0);
            t_prev + frac * dt
        };
        if slope > T::zero() {
            while l1 >= *r + thresholds.c_pos {
                *r += thresholds.c_pos;
                out.push(Event::new(crossing_time(*r), x, y, Polarity::Positive));
            }
        } else if slope < T::zero() {
            while l1 <= *r + thresholds.c_neg {
                *r += thresholds.c_neg;
                out.push(Event::new(crossing_time(*r), x, y, Polarity::Negative));
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Stateful generator over a sequence of log-brightness frames.
#[derive(Debug, Clone)]
pub struct EventGenerator<T> {
    width: usize,
    thresholds: Thresholds<T>,
    ref_level: Vec<T>,
    last: Vec<T>,
    last_t: f64,
}

impl<T: Scalar> EventGenerator<T> {
    /// Reference levels start at the first frame.
    pub fn new(initial_logl: &[T], width: usize, t0: f64, thresholds: Thresholds<T>) -> Self {
        Self {
            width,
            thresholds,
            ref_level: initial_logl.to_vec(),
            last: initial_logl.to_vec(),
            last_t: t0,
        }
    }

    pub fn advance(&mut self, logl: &[T], t: f64) -> Result<Vec<Event>> {
        let events = generate_events(
            &self.last,
            logl,
            &mut self.ref_level,
            &self.thresholds,
            self.width,
            (self.last_t, t),
        )?;
        self.last.copy_from_slice(logl);
        self.last_t = t;
        Ok(events)
    }

    pub fn reference_levels(&self) -> &[T] {
        &self.ref_level
    }
}
