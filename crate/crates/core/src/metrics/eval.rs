use super::frame::{mae_event_frame, psnr_event_frame, ssim_event_frame, Psnr};
use crate::error::{Error, Result};
use crate::events::{count_events, events_to_delta_l, DeltaLFrame, MagnitudeFilter, Thresholds};
use crate::io::dataset::Dataset;
use crate::io::image::write_event_png;
use crate::radiance::{render_delta_l, Camera, RenderOptions, SceneModel};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub samples_per_ray: usize,
    /// Zero predicted pixels with `|dL| <` this before scoring.
    pub filter: Option<f64>,
    /// Event count that saturates PNG colour.
    pub png_cap: u32,
    pub write_png: bool,
    pub chunk_rays: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            samples_per_ray: 32,
            filter: None,
            png_cap: crate::io::image::DEFAULT_EVENT_CAP,
            write_png: true,
            chunk_rays: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub view: usize,
    pub window: (f64, f64),
    pub psnr: Psnr,
    /// PSNR of predicting no change at all.
    pub zero_psnr: Psnr,
    pub ssim: Option<f64>,
    pub mae: f64,
    pub gt_events: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self {
                count: 0,
                mean: f64::NAN,
                median: f64::NAN,
            };
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Self {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub notes: Vec<String>,
    pub config: serde_json::Value,
    pub entries: Vec<EvalEntry>,
    pub psnr: Summary,
    pub zero_psnr: Summary,
    pub ssim: Summary,
    pub mae: Summary,
    pub skipped: Vec<String>,
    pub png_cap: u32,
    pub images: Vec<PathBuf>,
}

const NOTES: [&str; 3] = [
    "PSNR and SSIM use unquantized dL with dynamic range max(gt) - min(gt) per frame",
    "MAE compares threshold-quantized event counts",
    "LPIPS is not computed",
];

/// A predicted-only frame for a camera off the dataset's views.
#[derive(Debug, Clone)]
pub struct PathFrame {
    pub camera: Camera<f64>,
    pub window: (f64, f64),
}

/// Renders predicted dL for every `(view, window)` pair, scores it
/// against the dataset's events and optionally writes red/blue PNGs to
/// `out_dir`. Camera-path frames have no ground truth and are only drawn.
pub fn evaluate<T: Scalar>(
    model: &SceneModel<T>,
    dataset: &Dataset,
    windows: &[(f64, f64)],
    views: &[usize],
    camera_path: &[PathFrame],
    opts: &EvalOptions,
    out_dir: Option<&Path>,
) -> Result<EvalReport> {
    let meta = &dataset.meta;
    let th: Thresholds = meta.thresholds;
    let render = RenderOptions {
        samples_per_ray: opts.samples_per_ray,
        floor_b: meta.floor_b,
        jitter: None,
        chunk: opts.chunk_rays,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let (w, h) = (meta.width as usize, meta.height as usize);
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut images = Vec::new();
    for &view in views {
        let (Ok(stream), Ok(camera)) = (dataset.stream(view), meta.camera(view)) else {
            skipped.push(format!("view {view}: not in dataset"));
            continue;
        };
        for &(t0, t1) in windows {
            if !(0.0 <= t0 && t0 < t1 && t1 <= 1.0) {
                skipped.push(format!("view {view} window [{t0}, {t1}): outside the recorded span"));
                continue;
            }
            let events = stream.window(t0, t1);
            let gt: DeltaLFrame<f64> = events_to_delta_l(events.events(), th, (w, h), (t0, t1))?;
            let pred = predict(model, &camera, (t0, t1), &render, opts.filter)?;
            let zeros = vec![0.0; gt.values.len()];
            let ssim = if w >= super::frame::SSIM_WINDOW && h >= super::frame::SSIM_WINDOW {
                ssim_event_frame(&pred.values, &gt.values, w, h)?
            } else {
                None
            };
            entries.push(EvalEntry {
                view,
                window: (t0, t1),
                psnr: psnr_event_frame(&pred.values, &gt.values)?,
                zero_psnr: psnr_event_frame(&zeros, &gt.values)?,
                ssim,
                mae: mae_event_frame(&pred.values, &gt.values, &th)?,
                gt_events: events.len(),
            });
            if let (Some(dir), true) = (out_dir, opts.write_png) {
                let stem = format!("view_{view:03}_{t0:.4}_{t1:.4}");
                let p = dir.join(format!("{stem}_pred.png"));
                write_event_png(&p, &count_events(&pred, &th), opts.png_cap)?;
                let g = dir.join(format!("{stem}_gt.png"));
                write_event_png(&g, &count_events(&gt, &th), opts.png_cap)?;
                images.extend([p, g]);
            }
        }
    }
    for (i, frame) in camera_path.iter().enumerate() {
        let pred = predict(model, &frame.camera, frame.window, &render, opts.filter)?;
        if let Some(dir) = out_dir {
            let p = dir.join(format!("path_{i:04}.png"));
            write_event_png(&p, &count_events(&pred, &th), opts.png_cap)?;
            images.push(p);
        }
    }
    Ok(EvalReport {
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
        config: serde_json::json!({
            "windows": windows,
            "views": views,
            "options": opts,
            "thresholds": th,
            "camera_path_frames": camera_path.len(),
        }),
        psnr: Summary::of(entries.iter().filter_map(|e| e.psnr.value())),
        zero_psnr: Summary::of(entries.iter().filter_map(|e| e.zero_psnr.value())),
        ssim: Summary::of(entries.iter().filter_map(|e| e.ssim)),
        mae: Summary::of(entries.iter().map(|e| e.mae)),
        entries,
        skipped,
        png_cap: opts.png_cap,
        images,
    })
}

/// Predicted dL frame for `camera` over `window`, optionally filtered.
pub fn predict<T: Scalar>(
    model: &SceneModel<T>,
    camera: &Camera<f64>,
    window: (f64, f64),
    render: &RenderOptions,
    filter: Option<f64>,
) -> Result<DeltaLFrame<f64>> {
    let cam: Camera<T> = camera.cast();
    let rays = cam.all_rays();
    let values = render_delta_l(model, &rays, cam.near, cam.far, (T::lit(window.0), T::lit(window.1)), render)?;
    let frame = DeltaLFrame::from_values(
        camera.width as usize,
        camera.height as usize,
        values.iter().map(|v| v.as_f64()).collect(),
        window,
    )?;
    Ok(match filter {
        Some(min) => frame.filter_magnitude(min),
        None => frame,
    })
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("report.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?);
    let mut emit = || -> std::io::Result<()> {
        for n in &report.notes {
            writeln!(f, "# {n}")?;
        }
        writeln!(f, "view,t0,t1,psnr_db,psnr_flag,zero_psnr_db,ssim,mae,gt_events")?;
        for e in &report.entries {
            let flag = serde_json::to_value(e.psnr.flag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let ssim = e.ssim.map_or_else(String::new, |s| s.to_string());
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{}",
                e.view, e.window.0, e.window.1, e.psnr.db, flag, e.zero_psnr.db, ssim, e.mae, e.gt_events
            )?;
        }
        f.flush()
    };
    emit().map_err(|e| Error::io(&csv, e))?;
    Ok((json, csv))
}
