//! Analytic dynamic scenes, their ground-truth renders and simulated
//! event datasets.

mod dataset;
mod scene;

pub use dataset::{gen_dataset, simulate_view, substep_times, DatasetConfig};
pub use scene::{gt_query, gt_render, AnalyticScene, Keyframe, Primitive, Shape};
