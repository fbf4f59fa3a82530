use super::scene::{gt_render, AnalyticScene};
use crate::error::{Error, Result};
use crate::events::{EventGenerator, EventStream, Thresholds};
use crate::io::dataset::{frame_name, view_events_name, write_meta, DatasetMeta, FrameRecord, Split, ViewRecord};
use crate::io::evd1::write_events;
use crate::io::image::write_pgm16;
use crate::radiance::{look_at, Camera, LOG_FLOOR};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_views: usize,
    pub n_frames: usize,
    pub width: u32,
    pub height: u32,
    pub fov_x_deg: f64,
    /// Camera distance from the origin.
    pub radius: f64,
    pub elevation_deg: f64,
    /// Simulated sub-frames per stored frame interval.
    pub supersample: usize,
    pub samples_per_ray: usize,
    pub floor_b: f64,
    pub thresholds: Thresholds,
    /// Also emit one validation view per training view.
    pub validation_views: bool,
    /// Azimuth offset of validation views; half the spacing when unset.
    pub validation_offset_deg: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_views: 8,
            n_frames: 32,
            width: 48,
            height: 48,
            fov_x_deg: 40.0,
            radius: 4.0,
            elevation_deg: 15.0,
            supersample: 8,
            samples_per_ray: 64,
            floor_b: LOG_FLOOR,
            thresholds: Thresholds::default(),
            validation_views: true,
            validation_offset_deg: None,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_views == 0 || self.n_frames < 2 || self.supersample == 0 {
            return Err(Error::Argument("need n_views >= 1, n_frames >= 2 and supersample >= 1".into()));
        }
        if self.width == 0 || self.height == 0 || self.width > 65536 || self.height > 65536 {
            return Err(Error::Argument("resolution must be between 1 and 65536".into()));
        }
        if !(self.floor_b > 0.0) || !(self.radius > 0.0) || !(self.fov_x_deg > 0.0 && self.fov_x_deg < 180.0) {
            return Err(Error::Argument("floor, radius and field of view must be positive".into()));
        }
        if self.validation_offset_deg.is_some_and(|o| !o.is_finite()) {
            return Err(Error::Argument("validation offset must be finite".into()));
        }
        Ok(())
    }

    /// Azimuths of training views, then validation views.
    pub fn azimuths(&self) -> Vec<(f64, Split)> {
        let step = 360.0 / self.n_views as f64;
        let mut out: Vec<(f64, Split)> = (0..self.n_views).map(|i| (i as f64 * step, Split::Train)).collect();
        if self.validation_views {
            let offset = self.validation_offset_deg.unwrap_or(step / 2.0);
            out.extend((0..self.n_views).map(|i| (i as f64 * step + offset, Split::Val)));
        }
        out
    }

    /// Depth range covering the scene box from every camera.
    pub fn near_far(&self, bound: f64) -> Result<(f64, f64)> {
        let reach = bound * 3f64.sqrt() / 2.0;
        let near = self.radius - reach;
        if !(near > 0.0) {
            return Err(Error::Argument(format!(
                "camera radius {} lies inside the scene box (needs > {reach:.3})",
                self.radius
            )));
        }
        Ok((near, self.radius + reach))
    }

    pub fn pose(&self, azimuth_deg: f64) -> [[f64; 4]; 4] {
        let (a, e) = (azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        let eye = [self.radius * e.cos() * a.sin(), self.radius * e.sin(), self.radius * e.cos() * a.cos()];
        look_at(eye, [0.0; 3], [0.0, 1.0, 0.0])
    }

    /// Camera on the view orbit at `azimuth_deg`, framing a scene box of side `bound`.
    pub fn camera(&self, azimuth_deg: f64, bound: f64) -> Result<Camera<f64>> {
        let (near, far) = self.near_far(bound)?;
        Camera::from_fov(self.width, self.height, self.fov_x_deg.to_radians(), self.pose(azimuth_deg), near, far)
    }
}

/// Times at which the scene is rendered for event simulation.
pub fn substep_times(n_frames: usize, supersample: usize) -> Vec<f64> {
    let n = (n_frames - 1) * supersample;
    (0..=n).map(|j| if j == n { 1.0 } else { j as f64 / n as f64 }).collect()
}

/// Simulated eventstream for one camera plus the stored frames.
pub fn simulate_view(scene: &AnalyticScene, camera: &Camera<f64>, cfg: &DatasetConfig) -> Result<(EventStream, Vec<Vec<f64>>)> {
    let times = substep_times(cfg.n_frames, cfg.supersample);
    let width = camera.width as usize;
    let log = |img: &[f64]| img.iter().map(|v| (v + cfg.floor_b).ln()).collect::<Vec<_>>();
    let first = gt_render(scene, camera, times[0], cfg.samples_per_ray)?;
    let mut generator = EventGenerator::new(&log(&first), width, times[0], cfg.thresholds);
    let mut frames = vec![first];
    let mut events = Vec::new();
    let moving = !scene.is_static();
    for (j, &t) in times.iter().enumerate().skip(1) {
        let stored = j % cfg.supersample == 0;
        if !moving && !stored {
            continue;
        }
        let img = if moving { gt_render(scene, camera, t, cfg.samples_per_ray)? } else { frames[0].clone() };
        events.extend(generator.advance(&log(&img), t)?);
        if stored {
            frames.push(img);
        }
    }
    let stream = EventStream::new(events, camera.width, camera.height, cfg.thresholds)?;
    Ok((stream, frames))
}

/// Renders every view of `scene`, simulates its events and writes the
/// dataset under `out_dir`.
pub fn gen_dataset(scene: &AnalyticScene, cfg: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<DatasetMeta> {
    cfg.validate()?;
    scene.validate()?;
    let out = out_dir.as_ref();
    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let (near, far) = cfg.near_far(scene.bound)?;
    let fov = cfg.fov_x_deg.to_radians();
    let views: Vec<ViewRecord> = cfg
        .azimuths()
        .into_iter()
        .enumerate()
        .map(|(index, (azimuth_deg, split))| ViewRecord {
            index,
            split,
            azimuth_deg,
            events: view_events_name(index),
            transform_matrix: cfg.pose(azimuth_deg),
        })
        .collect();
    let frame_times: Vec<f64> = substep_times(cfg.n_frames, 1);
    views.par_iter().try_for_each(|v| -> Result<()> {
        let camera = Camera::from_fov(cfg.width, cfg.height, fov, v.transform_matrix, near, far)?;
        let (stream, frames) = simulate_view(scene, &camera, cfg)?;
        write_events(out.join(&v.events), &stream)?;
        for (k, img) in frames.iter().enumerate() {
            write_pgm16(out.join(frame_name(v.index, k)), img, cfg.width, cfg.height)?;
        }
        log::debug!("view {} ({:.1} deg): {} events", v.index, v.azimuth_deg, stream.len());
        Ok(())
    })?;
    let frames = views
        .iter()
        .flat_map(|v| {
            frame_times.iter().enumerate().map(move |(k, &time)| FrameRecord {
                file_path: frame_name(v.index, k),
                view: v.index,
                time,
                transform_matrix: v.transform_matrix,
            })
        })
        .collect();
    let meta = DatasetMeta {
        camera_angle_x: fov,
        width: cfg.width,
        height: cfg.height,
        near,
        far,
        thresholds: cfg.thresholds,
        n_frames: cfg.n_frames,
        floor_b: cfg.floor_b,
        supersample: cfg.supersample,
        samples_per_ray: cfg.samples_per_ray,
        scene: Some(scene.clone()),
        views,
        frames,
    };
    write_meta(out, &meta)?;
    Ok(meta)
}
