use super::camera::{Camera, Ray};
use super::model::SceneModel;
use crate::error::Result;
use crate::nn::{ParamGrads, Tape};
use crate::rng::SeedTree;
use crate::scalar::Scalar;
use rayon::prelude::*;

/// Additive floor inside `log(C + floor)`; keeps empty pixels finite.
pub const LOG_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub samples_per_ray: usize,
    pub floor_b: f64,
    /// Seed for stratified jitter; `None` samples stratum midpoints.
    pub jitter: Option<u64>,
    /// Rays per tape.
    pub chunk: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            samples_per_ray: 64,
            floor_b: LOG_FLOOR,
            jitter: None,
            chunk: 256,
        }
    }
}

fn chunk_rng(opts: &RenderOptions, chunk: usize) -> Option<crate::rng::Rng> {
    opts.jitter.map(|s| SeedTree::new(s).indexed("render-jitter", chunk as u64))
}

/// Composited intensities of `rays` at time `t`.
pub fn render_rays<T: Scalar>(model: &SceneModel<T>, rays: &[Ray<T>], near: T, far: T, t: T, opts: &RenderOptions) -> Result<Vec<T>> {
    let parts: Result<Vec<Vec<T>>> = rays
        .par_chunks(opts.chunk.max(1))
        .enumerate()
        .map(|(ci, chunk)| {
            let mut rng = chunk_rng(opts, ci);
            let batch = model.sample_batch(chunk, near, far, opts.samples_per_ray, rng.as_mut());
            let mut tape = Tape::new();
            let c = model.record_intensities(&mut tape, &batch, &[t])?;
            Ok(tape.value(c).data.clone())
        })
        .collect();
    Ok(parts?.concat())
}

/// Intensity image at time `t`, row-major, values in `[0, 1]`.
pub fn render_image<T: Scalar>(model: &SceneModel<T>, camera: &Camera<T>, t: T, opts: &RenderOptions) -> Result<Vec<T>> {
    render_rays(model, &camera.all_rays(), camera.near, camera.far, t, opts)
}

/// Image of the canonical field alone.
pub fn render_canonical_image<T: Scalar>(model: &SceneModel<T>, camera: &Camera<T>, opts: &RenderOptions) -> Result<Vec<T>> {
    let rays = camera.all_rays();
    let parts: Result<Vec<Vec<T>>> = rays
        .par_chunks(opts.chunk.max(1))
        .enumerate()
        .map(|(ci, chunk)| {
            let mut rng = chunk_rng(opts, ci);
            let batch = model.sample_batch(chunk, camera.near, camera.far, opts.samples_per_ray, rng.as_mut());
            let mut tape = Tape::new();
            let c = model.record_canonical_intensities(&mut tape, &batch)?;
            Ok(tape.value(c).data.clone())
        })
        .collect();
    Ok(parts?.concat())
}

/// Predicted log-brightness change `log(C(t1) + b) - log(C(t0) + b)` per ray.
pub fn render_delta_l<T: Scalar>(
    model: &SceneModel<T>,
    rays: &[Ray<T>],
    near: T,
    far: T,
    (t0, t1): (T, T),
    opts: &RenderOptions,
) -> Result<Vec<T>> {
    let parts: Result<Vec<Vec<T>>> = rays
        .par_chunks(opts.chunk.max(1))
        .enumerate()
        .map(|(ci, chunk)| {
            let mut rng = chunk_rng(opts, ci);
            let batch = model.sample_batch(chunk, near, far, opts.samples_per_ray, rng.as_mut());
            let mut tape = Tape::new();
            let d = record_delta_l(&mut tape, model, &batch, (t0, t1), T::lit(opts.floor_b))?;
            Ok(tape.value(d).data.clone())
        })
        .collect();
    Ok(parts?.concat())
}

/// Records `log(C(t1) + b) - log(C(t0) + b)` for every ray in `batch`.
pub fn record_delta_l<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    model: &'a SceneModel<T>,
    batch: &super::SampledBatch<T>,
    (t0, t1): (T, T),
    floor_b: T,
) -> Result<crate::nn::NodeId> {
    let rays = batch.segments.len();
    let c = model.record_intensities(tape, batch, &[t0, t1])?;
    let shifted = tape.add_const(c, floor_b);
    let log_c = tape.ln(shifted);
    let before = tape.rows(log_c, 0, rays)?;
    let after = tape.rows(log_c, rays, rays)?;
    tape.sub(after, before)
}

/// Gradient of `sum_i seed_i * dL_i` with respect to all parameters, where
/// `dL` is [`render_delta_l`] on `rays`. Used by gradient checks.
pub fn delta_l_gradients<T: Scalar>(
    model: &SceneModel<T>,
    rays: &[Ray<T>],
    near: T,
    far: T,
    window: (T, T),
    opts: &RenderOptions,
    seed: &[T],
) -> Result<(Vec<T>, ParamGrads<T>)> {
    let mut rng = chunk_rng(opts, 0);
    let batch = model.sample_batch(rays, near, far, opts.samples_per_ray, rng.as_mut());
    let mut tape = Tape::new();
    let d = record_delta_l(&mut tape, model, &batch, window, T::lit(opts.floor_b))?;
    let mut grads = model.zero_grads();
    tape.backward_seeded(d, crate::nn::Mat::column(seed.to_vec()), &mut grads)?;
    Ok((tape.value(d).data.clone(), grads))
}
