use super::camera::{Ray, Vec3};
use super::sampling::{sample_deltas, stratified_samples};
use crate::error::{Error, Result};
use crate::nn::{encode_into, encoded_len, Activation, Layer, Mat, MlpParams, NodeId, ParamGrads, Tape};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFORM_NET: usize = 0;
pub const CANONICAL_NET: usize = 1;

/// Architecture and encoding settings for a [`SceneModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Edge length `b` of the origin-centred scene box.
    pub bound: f64,
    pub x_freq: usize,
    pub t_freq: usize,
    pub d_freq: usize,
    pub use_view_dirs: bool,
    pub deform_width: usize,
    pub deform_hidden: usize,
    pub canonical_width: usize,
    pub canonical_hidden: usize,
    /// Offset added to the initial density pre-activation. Negative values
    /// start training from a nearly empty, dark volume.
    pub density_bias: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            bound: 4.0,
            x_freq: 10,
            t_freq: 6,
            d_freq: 4,
            use_view_dirs: false,
            deform_width: 64,
            deform_hidden: 3,
            canonical_width: 64,
            canonical_hidden: 4,
            density_bias: 0.0,
        }
    }
}

impl ModelConfig {
    /// Narrow networks with fewer frequencies, sized for CPU training at 48x48.
    pub fn desk() -> Self {
        Self {
            x_freq: 6,
            t_freq: 4,
            deform_width: 32,
            deform_hidden: 2,
            canonical_width: 32,
            canonical_hidden: 3,
            ..Self::default()
        }
    }

    pub fn deform_in(&self) -> usize {
        encoded_len(3, self.x_freq, true) + encoded_len(1, self.t_freq, true)
    }

    pub fn canonical_in(&self) -> usize {
        encoded_len(3, self.x_freq, true) + if self.use_view_dirs { encoded_len(3, self.d_freq, true) } else { 0 }
    }
}

/// Deformation network plus canonical radiance field.
///
/// `deform` maps encoded `(x, t)` to a raw displacement which is scaled by
/// `t`, so the displacement at `t = 0` is exactly zero. `canonical` maps the
/// encoded displaced point (and optionally view direction) to raw
/// `(density, intensity)`, squashed by softplus and sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel<T> {
    pub config: ModelConfig,
    pub deform: MlpParams<T>,
    pub canonical: MlpParams<T>,
}

/// Samples inside the scene box for a batch of rays. Samples outside the
/// box have zero density and are dropped; they cannot affect compositing.
#[derive(Debug, Clone, Default)]
pub struct SampledBatch<T> {
    pub positions: Vec<Vec3<T>>,
    pub dirs: Vec<Vec3<T>>,
    pub deltas: Vec<T>,
    /// `(start, len)` into the sample arrays, one per ray.
    pub segments: Vec<(usize, usize)>,
}

impl<T: Scalar> SceneModel<T> {
    /// Fan-in uniform init; the displacement output layer starts at zero so
    /// a fresh model is static.
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        if !(config.bound > 0.0) {
            return Err(Error::Argument("scene bound must be positive".into()));
        }
        let mut sizes = vec![config.deform_in()];
        sizes.extend(std::iter::repeat(config.deform_width).take(config.deform_hidden));
        sizes.push(3);
        let mut deform = MlpParams::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        let last = deform.layers.last_mut().expect("non-empty");
        *last = Layer::zeros(last.in_dim, 3, Activation::Identity);

        let mut sizes = vec![config.canonical_in()];
        sizes.extend(std::iter::repeat(config.canonical_width).take(config.canonical_hidden));
        sizes.push(2);
        let mut canonical = MlpParams::<T>::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        canonical.layers.last_mut().expect("non-empty").bias[0] += T::lit(config.density_bias);
        Ok(Self {
            config,
            deform,
            canonical,
        })
    }

    pub fn from_parts(config: ModelConfig, deform: MlpParams<T>, canonical: MlpParams<T>) -> Result<Self> {
        if deform.in_dim() != config.deform_in() || deform.out_dim() != 3 {
            return Err(Error::Architecture("deformation network does not match encoder settings".into()));
        }
        if canonical.in_dim() != config.canonical_in() || canonical.out_dim() != 2 {
            return Err(Error::Architecture("canonical network does not match encoder settings".into()));
        }
        Ok(Self {
            config,
            deform,
            canonical,
        })
    }

    pub fn half_bound(&self) -> T {
        T::lit(self.config.bound * 0.5)
    }

    #[inline]
    pub fn in_bounds(&self, x: &Vec3<T>) -> bool {
        let h = self.half_bound();
        x.iter().all(|v| *v > -h && *v < h)
    }

    pub fn zero_grads(&self) -> ParamGrads<T> {
        ParamGrads::for_layers([self.deform.layers.as_slice(), self.canonical.layers.as_slice()])
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.deform.param_slices_mut();
        v.extend(self.canonical.param_slices_mut());
        v
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.deform
            .layers
            .iter()
            .chain(&self.canonical.layers)
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.deform.param_count() + self.canonical.param_count()
    }

    pub fn all_finite(&self) -> bool {
        self.deform.all_finite() && self.canonical.all_finite()
    }

    /// Collects the in-box stratified samples of `rays` over `[near, far]`.
    pub fn sample_batch<R: Rng>(
        &self,
        rays: &[Ray<T>],
        near: T,
        far: T,
        samples_per_ray: usize,
        mut jitter: Option<&mut R>,
    ) -> SampledBatch<T> {
        let mut batch = SampledBatch::default();
        for ray in rays {
            let depths = stratified_samples(near, far, samples_per_ray, jitter.as_deref_mut());
            let deltas = sample_deltas(&depths, near, far);
            let start = batch.positions.len();
            for (d, delta) in depths.iter().zip(deltas) {
                let p = ray.at(*d);
                if self.in_bounds(&p) {
                    batch.positions.push(p);
                    batch.dirs.push(ray.dir);
                    batch.deltas.push(delta);
                }
            }
            batch.segments.push((start, batch.positions.len() - start));
        }
        batch
    }

    /// Records `(sigma, color)` for every row of `points` at per-row times.
    /// Returns `(sigma, color)` nodes, each `n x 1`.
    pub fn record_fields<'a>(
        &'a self,
        tape: &mut Tape<'a, T>,
        points: &[Vec3<T>],
        dirs: &[Vec3<T>],
        times: &[T],
    ) -> Result<(NodeId, NodeId)> {
        let n = points.len();
        if dirs.len() != n || times.len() != n {
            return Err(Error::Shape("points, directions and times differ in length".into()));
        }
        let c = &self.config;
        let xw = encoded_len(3, c.x_freq, true);
        let tw = encoded_len(1, c.t_freq, true);
        let mut deform_in = Mat::zeros(n, xw + tw);
        for r in 0..n {
            let row = deform_in.row_mut(r);
            encode_into(&points[r], c.x_freq, true, &mut row[..xw]);
            encode_into(&[times[r]], c.t_freq, true, &mut row[xw..]);
        }
        let deform_in = tape.constant(deform_in);
        let raw = self.deform.forward_tape(tape, deform_in, DEFORM_NET)?;
        let displacement = tape.row_scale(raw, times.to_vec())?;
        let base = tape.constant(Mat::from_vec(n, 3, points.iter().flatten().copied().collect())?);
        let moved = tape.add(base, displacement)?;
        self.record_canonical(tape, moved, dirs)
    }

    /// Canonical field at the (possibly displaced) positions in node `x`.
    pub fn record_canonical<'a>(&'a self, tape: &mut Tape<'a, T>, x: NodeId, dirs: &[Vec3<T>]) -> Result<(NodeId, NodeId)> {
        let c = &self.config;
        let enc = tape.positional_encode(x, c.x_freq, true);
        let input = if c.use_view_dirs {
            let dw = encoded_len(3, c.d_freq, true);
            let mut d = Mat::zeros(dirs.len(), dw);
            for (r, dir) in dirs.iter().enumerate() {
                encode_into(dir, c.d_freq, true, d.row_mut(r));
            }
            let d = tape.constant(d);
            tape.concat(&[enc, d])?
        } else {
            enc
        };
        let raw = self.canonical.forward_tape(tape, input, CANONICAL_NET)?;
        let s = tape.column(raw, 0)?;
        let sigma = tape.activation(s, Activation::Softplus);
        let col = tape.column(raw, 1)?;
        let color = tape.activation(col, Activation::Sigmoid);
        Ok((sigma, color))
    }

    /// Records composited intensities of `batch` at each of `times`. The
    /// output is `(times.len() * rays) x 1`, grouped by time.
    pub fn record_intensities<'a>(&'a self, tape: &mut Tape<'a, T>, batch: &SampledBatch<T>, times: &[T]) -> Result<NodeId> {
        let n = batch.positions.len();
        let k = times.len();
        let mut points = Vec::with_capacity(n * k);
        let mut dirs = Vec::with_capacity(n * k);
        let mut row_times = Vec::with_capacity(n * k);
        let mut deltas = Vec::with_capacity(n * k);
        let mut segments = Vec::with_capacity(batch.segments.len() * k);
        for (j, &t) in times.iter().enumerate() {
            points.extend_from_slice(&batch.positions);
            dirs.extend_from_slice(&batch.dirs);
            row_times.extend(std::iter::repeat(t).take(n));
            deltas.extend_from_slice(&batch.deltas);
            segments.extend(batch.segments.iter().map(|&(s, l)| (s + j * n, l)));
        }
        let (sigma, color) = self.record_fields(tape, &points, &dirs, &row_times)?;
        tape.composite(sigma, color, deltas, segments)
    }

    /// Intensities of `batch` straight from the canonical field, bypassing
    /// the deformation network.
    pub fn record_canonical_intensities<'a>(&'a self, tape: &mut Tape<'a, T>, batch: &SampledBatch<T>) -> Result<NodeId> {
        let n = batch.positions.len();
        let x = tape.constant(Mat::from_vec(n, 3, batch.positions.iter().flatten().copied().collect())?);
        let (sigma, color) = self.record_canonical(tape, x, &batch.dirs)?;
        tape.composite(sigma, color, batch.deltas.clone(), batch.segments.clone())
    }
}

/// `(intensity, density)` of the model at one point and time. Density is
/// zero outside the scene box.
pub fn query_model<T: Scalar>(model: &SceneModel<T>, x: Vec3<T>, t: T, d: Vec3<T>) -> Result<(T, T)> {
    let mut tape = Tape::new();
    let (sigma, color) = model.record_fields(&mut tape, &[x], &[d], &[t])?;
    let s = if model.in_bounds(&x) { tape.value(sigma).data[0] } else { T::zero() };
    Ok((tape.value(color).data[0], s))
}
