use crate::events::DeltaLFrame;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) as usize * (self.y1 - self.y0) as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    /// Bounding box of `mask`, grown by `pad` of its size on every side
    /// (at least one pixel) and clipped to the frame. `None` if the mask is empty.
    pub fn bounding(mask: &[bool], width: u32, height: u32, pad: f64) -> Option<Self> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            let (x, y) = (i as u32 % width, i as u32 / width);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
        }
        if x0 == u32::MAX {
            return None;
        }
        let px = ((f64::from(x1 - x0) * pad).ceil() as u32).max(1);
        let py = ((f64::from(y1 - y0) * pad).ceil() as u32).max(1);
        Some(Self {
            x0: x0.saturating_sub(px),
            y0: y0.saturating_sub(py),
            x1: (x1 + px).min(width),
            y1: (y1 + py).min(height),
        })
    }
}

/// One training ray: index into the frame list plus pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaySample {
    pub view: usize,
    pub x: u32,
    pub y: u32,
}

/// Draws `n` rays: `ceil(n * positive_fraction)` uniformly from pixels with
/// a nonzero target across all frames, the rest uniformly from all pixels.
/// With `crop`, both pools are limited to each view's rectangle. Without
/// any nonzero pixel every ray is uniform.
pub fn sample_rays<T: Scalar, R: Rng>(
    frames: &[&DeltaLFrame<T>],
    n: usize,
    positive_fraction: f64,
    crop: Option<&[Rect]>,
    rng: &mut R,
) -> Vec<RaySample> {
    assert!(!frames.is_empty(), "sample_rays needs at least one view");
    let rect = |v: usize| {
        crop.map_or_else(|| Rect::full(frames[v].width as u32, frames[v].height as u32), |c| c[v])
    };
    let mut positive = Vec::new();
    if positive_fraction > 0.0 {
        for (v, f) in frames.iter().enumerate() {
            let r = rect(v);
            for y in r.y0..r.y1 {
                for x in r.x0..r.x1 {
                    if !f.get(x as usize, y as usize).is_zero() {
                        positive.push(RaySample { view: v, x, y });
                    }
                }
            }
        }
    }
    let n_pos = if positive.is_empty() {
        if positive_fraction > 0.0 {
            log::debug!("no nonzero target pixels; sampling all rays uniformly");
        }
        0
    } else {
        ((n as f64 * positive_fraction).ceil() as usize).min(n)
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n_pos {
        out.push(positive[rng.gen_range(0..positive.len())]);
    }
    let areas: Vec<usize> = (0..frames.len()).map(|v| rect(v).area()).collect();
    let total: usize = areas.iter().sum();
    for _ in n_pos..n {
        let mut k = rng.gen_range(0..total);
        let mut v = 0;
        while k >= areas[v] {
            k -= areas[v];
            v += 1;
        }
        let r = rect(v);
        let w = (r.x1 - r.x0) as usize;
        out.push(RaySample {
            view: v,
            x: r.x0 + (k % w) as u32,
            y: r.y0 + (k / w) as u32,
        });
    }
    out
}
