use crate::error::{Error, Result};
use crate::events::{count_for, Thresholds};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Reported PSNR when prediction and ground truth agree exactly.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricFlag {
    Finite,
    /// Zero error; the value is the cap.
    Identical,
    /// Ground truth has zero range; the value is NaN.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psnr {
    pub db: f64,
    pub flag: MetricFlag,
}

impl Psnr {
    /// `db` unless undefined.
    pub fn value(&self) -> Option<f64> {
        (self.flag != MetricFlag::Undefined).then_some(self.db)
    }
}

fn check_shapes<T>(pred: &[T], gt: &[T]) -> Result<()> {
    if pred.len() != gt.len() || gt.is_empty() {
        return Err(Error::Shape(format!("{} predicted vs {} ground-truth pixels", pred.len(), gt.len())));
    }
    Ok(())
}

pub fn value_range<T: Scalar>(v: &[T]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        let x = x.as_f64();
        (lo.min(x), hi.max(x))
    });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

/// `10 log10(range^2 / mse)` with `range = max(gt) - min(gt)`.
pub fn psnr_event_frame<T: Scalar>(pred: &[T], gt: &[T]) -> Result<Psnr> {
    check_shapes(pred, gt)?;
    psnr_with_range(pred, gt, value_range(gt))
}

pub fn psnr_with_range<T: Scalar>(pred: &[T], gt: &[T], range: f64) -> Result<Psnr> {
    check_shapes(pred, gt)?;
    if !(range > 0.0) {
        return Ok(Psnr {
            db: f64::NAN,
            flag: MetricFlag::Undefined,
        });
    }
    // summed in sorted order so pixel order cannot change the result
    let mut sq: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| (p.as_f64() - g.as_f64()).powi(2)).collect();
    sq.sort_unstable_by(f64::total_cmp);
    let mse = sq.iter().sum::<f64>() / gt.len() as f64;
    if !mse.is_finite() {
        return Err(Error::NonFinite("prediction contains non-finite values".into()));
    }
    if mse == 0.0 {
        return Ok(Psnr {
            db: PSNR_CAP_DB,
            flag: MetricFlag::Identical,
        });
    }
    Ok(Psnr {
        db: (10.0 * (range * range / mse).log10()).min(PSNR_CAP_DB),
        flag: MetricFlag::Finite,
    })
}

/// Mean over pixels of the absolute difference in quantized event counts.
pub fn mae_event_frame<T: Scalar>(pred: &[T], gt: &[T], thresholds: &Thresholds<T>) -> Result<f64> {
    check_shapes(pred, gt)?;
    let total: u64 = pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| u64::from((count_for(p, thresholds) - count_for(g, thresholds)).unsigned_abs()))
        .sum();
    Ok(total as f64 / gt.len() as f64)
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Mean SSIM and its luminance, contrast and structure terms over all
/// window positions, each term averaged separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParts {
    pub ssim: f64,
    pub luminance: f64,
    pub contrast: f64,
    pub structure: f64,
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for a in &g {
        for b in &g {
            w.push(a * b / (s * s));
        }
    }
    w
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5) over valid positions and
/// dynamic range equal to the ground-truth range. `None` when that range is zero.
pub fn ssim_event_frame<T: Scalar>(pred: &[T], gt: &[T], width: usize, height: usize) -> Result<Option<f64>> {
    Ok(ssim_parts(pred, gt, width, height)?.map(|p| p.ssim))
}

pub fn ssim_parts<T: Scalar>(pred: &[T], gt: &[T], width: usize, height: usize) -> Result<Option<SsimParts>> {
    check_shapes(pred, gt)?;
    if pred.len() != width * height {
        return Err(Error::Shape(format!("{} pixels for a {width}x{height} frame", pred.len())));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::Argument(format!(
            "{width}x{height} frame is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let range = value_range(gt);
    if !(range > 0.0) {
        return Ok(None);
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let c3 = c2 / 2.0;
    let w = gaussian_window();
    let (mut acc, mut n) = ([0.0f64; 4], 0usize);
    for y0 in 0..=height - SSIM_WINDOW {
        for x0 in 0..=width - SSIM_WINDOW {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let i = (y0 + dy) * width + x0 + dx;
                    let k = w[dy * SSIM_WINDOW + dx];
                    let (a, b) = (pred[i].as_f64(), gt[i].as_f64());
                    mx += k * a;
                    my += k * b;
                    xx += k * a * a;
                    yy += k * b * b;
                    xy += k * a * b;
                }
            }
            let vx = (xx - mx * mx).max(0.0);
            let vy = (yy - my * my).max(0.0);
            let cov = xy - mx * my;
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let c = (2.0 * (vx * vy).sqrt() + c2) / (vx + vy + c2);
            let s = (cov + c3) / ((vx * vy).sqrt() + c3);
            let full = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc[0] += full;
            acc[1] += l;
            acc[2] += c;
            acc[3] += s;
            n += 1;
        }
    }
    let n = n as f64;
    Ok(Some(SsimParts {
        ssim: acc[0] / n,
        luminance: acc[1] / n,
        contrast: acc[2] / n,
        structure: acc[3] / n,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pattern(w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|i| ((i * 7919) % 13) as f64 * 0.2 - 1.2).collect()
    }

    #[test]
    fn identical_frames() {
        let g = pattern(16, 12);
        let p = psnr_event_frame(&g, &g).unwrap();
        assert_eq!((p.db, p.flag), (PSNR_CAP_DB, MetricFlag::Identical));
        assert!((ssim_event_frame(&g, &g, 16, 12).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mae_event_frame(&g, &g, &Thresholds::default()).unwrap(), 0.0);
    }

    #[test]
    fn uniform_error_of_tenth_range_is_20_db() {
        let g = pattern(10, 10);
        let r = value_range(&g);
        let p: Vec<f64> = g.iter().map(|v| v + r / 10.0).collect();
        assert!((psnr_event_frame(&p, &g).unwrap().db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_error_costs_six_db() {
        let g = pattern(10, 10);
        let e: Vec<f64> = (0..100).map(|i| ((i * 31) % 7) as f64 * 0.01 - 0.03).collect();
        let p1: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a + b).collect();
        let p2: Vec<f64> = g.iter().zip(&e).map(|(a, b)| a + 2.0 * b).collect();
        let d = psnr_event_frame(&p1, &g).unwrap().db - psnr_event_frame(&p2, &g).unwrap().db;
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn constant_ground_truth_is_flagged() {
        let g = vec![0.0; 144];
        let p = vec![0.2; 144];
        assert_eq!(psnr_event_frame(&p, &g).unwrap().flag, MetricFlag::Undefined);
        assert_eq!(ssim_event_frame(&p, &g, 12, 12).unwrap(), None);
    }

    #[test]
    fn ssim_sign_and_decomposition() {
        // checkerboard: zero mean inside every window
        let g: Vec<f64> = (0..225).map(|i| if (i % 15 + i / 15) % 2 == 0 { 0.4 } else { -0.4 }).collect();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        assert!(ssim_event_frame(&neg, &g, 15, 15).unwrap().unwrap() < 0.0);
        let shifted: Vec<f64> = g.iter().map(|v| v + 0.5).collect();
        let parts = ssim_parts(&shifted, &g, 15, 15).unwrap().unwrap();
        assert!(parts.luminance < 1.0);
        assert!((parts.structure - 1.0).abs() < 1e-12);
        assert!((parts.contrast - 1.0).abs() < 1e-12);
        assert!(ssim_event_frame(&g[..100], &g[..100], 10, 10).is_err());
    }

    #[test]
    fn mae_counts_events() {
        let th = Thresholds::default();
        let g = vec![0.0; 100];
        let mut p = g.clone();
        p[17] = 0.4;
        assert!((mae_event_frame(&p, &g, &th).unwrap() - 0.02).abs() < 1e-15);
        // sub-threshold noise in the ground truth is absorbed by quantization
        let noisy: Vec<f64> = g.iter().enumerate().map(|(i, _)| if i % 3 == 0 { 0.15 } else { -0.1 }).collect();
        assert_eq!(mae_event_frame(&p, &noisy, &th).unwrap(), mae_event_frame(&p, &g, &th).unwrap());
    }

    proptest! {
        #[test]
        fn permutation_invariance(seed in 0u64..1000) {
            let g: Vec<f64> = (0..64).map(|i| ((i as u64 * 2654435761 + seed) % 17) as f64 * 0.2 - 1.6).collect();
            let p: Vec<f64> = (0..64).map(|i| ((i as u64 * 40503 + seed * 3) % 11) as f64 * 0.2 - 1.0).collect();
            let perm: Vec<usize> = (0..64).map(|i| (i * 29 + seed as usize) % 64).collect();
            let gp: Vec<f64> = perm.iter().map(|&i| g[i]).collect();
            let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let th = Thresholds::default();
            prop_assert_eq!(mae_event_frame(&p, &g, &th).unwrap(), mae_event_frame(&pp, &gp, &th).unwrap());
            let (a, b) = (psnr_event_frame(&p, &g).unwrap().db, psnr_event_frame(&pp, &gp).unwrap().db);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
