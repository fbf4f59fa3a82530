//! On-disk dataset layout: `views.json`, `view_###.evd1` and
//! `frames/view_###_t###.pgm`.

use super::evd1::read_events;
use crate::error::{Error, Result};
use crate::events::{EventStream, Thresholds};
use crate::radiance::Camera;
use crate::synth::AnalyticScene;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VIEWS_FILE: &str = "views.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub index: usize,
    pub split: Split,
    pub azimuth_deg: f64,
    pub events: String,
    pub transform_matrix: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub file_path: String,
    pub view: usize,
    pub time: f64,
    pub transform_matrix: [[f64; 4]; 4],
}

/// Contents of `views.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub camera_angle_x: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub thresholds: Thresholds,
    pub n_frames: usize,
    pub floor_b: f64,
    pub supersample: usize,
    pub samples_per_ray: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<AnalyticScene>,
    pub views: Vec<ViewRecord>,
    pub frames: Vec<FrameRecord>,
}

impl DatasetMeta {
    pub fn camera(&self, view: usize) -> Result<Camera<f64>> {
        let rec = self
            .views
            .iter()
            .find(|v| v.index == view)
            .ok_or_else(|| Error::NotFound(format!("view {view}")))?;
        Camera::from_fov(self.width, self.height, self.camera_angle_x, rec.transform_matrix, self.near, self.far)
    }

    pub fn view_indices(&self, split: Split) -> Vec<usize> {
        self.views.iter().filter(|v| v.split == split).map(|v| v.index).collect()
    }

    /// Stored frame times, shared by every view.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.n_frames)
            .map(|k| if k + 1 == self.n_frames { 1.0 } else { k as f64 / (self.n_frames - 1) as f64 })
            .collect()
    }
}

pub fn view_events_name(view: usize) -> String {
    format!("view_{view:03}.evd1")
}

pub fn frame_name(view: usize, k: usize) -> String {
    format!("frames/view_{view:03}_t{k:03}.pgm")
}

/// A dataset loaded into memory. `streams[i]` belongs to `meta.views[i]`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub meta: DatasetMeta,
    pub streams: Vec<EventStream>,
}

impl Dataset {
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let meta = read_meta(&root)?;
        let streams = meta
            .views
            .iter()
            .map(|v| read_events(root.join(&v.events)))
            .collect::<Result<Vec<_>>>()?;
        for (v, s) in meta.views.iter().zip(&streams) {
            if s.resolution() != (meta.width, meta.height) {
                return Err(Error::Argument(format!("{} resolution disagrees with views.json", v.events)));
            }
        }
        Ok(Self { root, meta, streams })
    }

    pub fn stream(&self, view: usize) -> Result<&EventStream> {
        self.meta
            .views
            .iter()
            .position(|v| v.index == view)
            .map(|i| &self.streams[i])
            .ok_or_else(|| Error::NotFound(format!("view {view}")))
    }

    /// Ground-truth intensity frame `k` of `view`.
    pub fn frame(&self, view: usize, k: usize) -> Result<Vec<f64>> {
        let (v, _, _) = super::image::read_pgm16(self.root.join(frame_name(view, k)))?;
        Ok(v)
    }
}

pub fn read_meta(root: &Path) -> Result<DatasetMeta> {
    let path = root.join(VIEWS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_meta(root: &Path, meta: &DatasetMeta) -> Result<()> {
    let path = root.join(VIEWS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&path, e))
}

/// SHA-256 over `views.json` and every eventstream, in view order.
pub fn dataset_hash(root: impl AsRef<Path>) -> Result<String> {
    let root = root.as_ref();
    let meta = read_meta(root)?;
    let mut h = Sha256::new();
    let mut feed = |p: PathBuf| -> Result<()> {
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
        Ok(())
    };
    feed(root.join(VIEWS_FILE))?;
    for v in &meta.views {
        feed(root.join(&v.events))?;
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
