//! Ray geometry, sampling, the deformation-plus-canonical scene model and
//! differentiable volume rendering.

mod camera;
mod composite;
mod model;
mod render;
mod sampling;

pub use camera::{camera_rays, cross3, identity_pose, look_at, norm3, normalize3, sub3, Camera, Ray, Vec3};
pub use composite::{composite, composite_segment, RaySampleSet};
pub use model::{query_model, ModelConfig, SampledBatch, SceneModel, CANONICAL_NET, DEFORM_NET};
pub use render::{
    delta_l_gradients, record_delta_l, render_canonical_image, render_delta_l, render_image, render_rays, RenderOptions,
    LOG_FLOOR,
};
pub use sampling::{sample_deltas, stratified_samples};
