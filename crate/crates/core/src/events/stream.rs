use super::{Event, EventStream};
use crate::error::{Error, Result};

/// Splits a stream at `edges`; slice `i` holds events with
/// `edges[i] <= t < edges[i + 1]`.
pub fn slice_stream<'a>(stream: &'a EventStream, edges: &[f64]) -> Result<Vec<&'a [Event]>> {
    check_edges(edges)?;
    let events = stream.events();
    let cuts: Vec<usize> = edges.iter().map(|&e| events.partition_point(|ev| ev.t < e)).collect();
    Ok(cuts.windows(2).map(|w| &events[w[0]..w[1]]).collect())
}

/// Inserts the midpoint of every consecutive edge pair: `n` edges become `2n - 1`.
pub fn halve_windows(edges: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(edges.len() * 2);
    for w in edges.windows(2) {
        out.push(w[0]);
        out.push(w[0] + 0.5 * (w[1] - w[0]));
    }
    if let Some(&last) = edges.last() {
        out.push(last);
    }
    out
}

/// `n + 1` evenly spaced edges covering `[t0, t1]`.
pub fn uniform_edges(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| if k == n { t1 } else { t0 + (t1 - t0) * k as f64 / n as f64 })
        .collect()
}

pub(crate) fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 window edges, got {}", edges.len())));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument("window edges must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Default number of standard deviations a bin must exceed.
pub const SYNC_SIGMAS: f64 = 5.0;

/// Preceding bins needed before they form the baseline on their own.
const MIN_BASELINE_BINS: usize = 8;

/// Motion-start timestamp: left edge of the first histogram bin whose
/// count exceeds `mean + 5σ` of the bins before it.
pub fn sync_offset(stream: &EventStream, bin_width: f64) -> Result<f64> {
    sync_offset_with(stream, bin_width, SYNC_SIGMAS)
}

/// [`sync_offset`] with a configurable `sigmas`.
///
/// Bins are anchored at the first event. While fewer than eight bins
/// precede a candidate, the baseline is every other bin in the histogram,
/// which lets a burst in the very first bin register. The deviation is
/// floored at the Poisson level `sqrt(mean)` (and at one event) so a
/// near-empty baseline cannot trigger on single-event jitter.
pub fn sync_offset_with(stream: &EventStream, bin_width: f64, sigmas: f64) -> Result<f64> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Argument(format!("bin width must be > 0, got {bin_width}")));
    }
    let (t_first, t_last) = stream
        .time_span()
        .ok_or_else(|| Error::Argument("cannot synchronize an empty stream".into()))?;
    let n_bins = (((t_last - t_first) / bin_width).floor() as usize) + 1;
    if n_bins > 50_000_000 {
        return Err(Error::Argument("bin width too small for stream span".into()));
    }
    let mut hist = vec![0f64; n_bins];
    for e in stream.events() {
        let b = (((e.t - t_first) / bin_width).floor() as usize).min(n_bins - 1);
        hist[b] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let total_sq: f64 = hist.iter().map(|c| c * c).sum();
    let (mut run_sum, mut run_sq) = (0.0, 0.0);
    for (i, &count) in hist.iter().enumerate() {
        let (s, sq, n) = if i >= MIN_BASELINE_BINS {
            (run_sum, run_sq, i as f64)
        } else {
            (total - count, total_sq - count * count, (n_bins - 1) as f64)
        };
        if n >= 1.0 {
            let mean = s / n;
            let var = (sq / n - mean * mean).max(0.0);
            let sd = var.sqrt().max(mean.sqrt()).max(1.0);
            if count > mean + sigmas * sd {
                return Ok(t_first + i as f64 * bin_width);
            }
        }
        run_sum += count;
        run_sq += count * count;
    }
    Err(Error::NotFound("no histogram bin exceeds the peak criterion".into()))
}
