use super::config::TrainConfig;
use super::rays::{sample_rays, Rect};
use super::schedule::{schedule_tick, ScheduleState};
use crate::error::{Error, Result};
use crate::events::{events_to_delta_l, slice_stream, uniform_edges, DeltaLFrame, Thresholds};
use crate::io::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::io::dataset::{Dataset, Split};
use crate::nn::{adam_step, AdamConfig, AdamState, ParamGrads, Tape};
use crate::radiance::{record_delta_l, Camera, ModelConfig, SceneModel};
use crate::rng::SeedTree;
use crate::scalar::Scalar;
use rand::Rng;
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Crop padding as a fraction of the event bounding box.
const CROP_PAD: f64 = 0.1;

/// Training views of a dataset with their event targets for the current
/// window edges.
#[derive(Debug, Clone)]
pub struct TrainingData<T> {
    pub views: Vec<usize>,
    pub cameras: Vec<Camera<T>>,
    pub streams: Vec<crate::events::EventStream>,
    /// `frames[view][window]`.
    pub frames: Vec<Vec<DeltaLFrame<f64>>>,
    pub crops: Vec<Rect>,
    pub edges: Vec<f64>,
    pub floor_b: f64,
    pub thresholds: Thresholds,
    pub n_frames: usize,
}

impl<T: Scalar> TrainingData<T> {
    pub fn new(dataset: &Dataset, views: &[usize]) -> Result<Self> {
        let meta = &dataset.meta;
        if views.is_empty() {
            return Err(Error::Argument("no training views".into()));
        }
        let mut cameras = Vec::new();
        let mut streams = Vec::new();
        let mut crops = Vec::new();
        for &v in views {
            cameras.push(meta.camera(v)?.cast());
            let s = dataset.stream(v)?.clone();
            let (w, h) = s.resolution();
            let mut mask = vec![false; (w * h) as usize];
            for e in s.events() {
                mask[e.y as usize * w as usize + e.x as usize] = true;
            }
            crops.push(Rect::bounding(&mask, w, h, CROP_PAD).unwrap_or_else(|| Rect::full(w, h)));
            streams.push(s);
        }
        Ok(Self {
            views: views.to_vec(),
            cameras,
            streams,
            frames: Vec::new(),
            crops,
            edges: Vec::new(),
            floor_b: meta.floor_b,
            thresholds: meta.thresholds,
            n_frames: meta.n_frames,
        })
    }

    /// Recomputes every target frame for `edges`.
    pub fn set_edges(&mut self, edges: &[f64]) -> Result<()> {
        if self.edges == edges {
            return Ok(());
        }
        let frames = self
            .streams
            .iter()
            .map(|s| {
                let (w, h) = s.resolution();
                slice_stream(s, edges)?
                    .into_iter()
                    .zip(edges.windows(2))
                    .map(|(ev, win)| events_to_delta_l(ev, s.thresholds(), (w as usize, h as usize), (win[0], win[1])))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        self.frames = frames;
        self.edges = edges.to_vec();
        Ok(())
    }
}

/// One step's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iteration: u64,
    pub lr: f64,
    pub window: (f64, f64),
    pub loss: f64,
}

/// Model, optimizer and schedule for one training run.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    pub model: SceneModel<T>,
    pub adam: AdamState<T>,
    pub state: ScheduleState,
    pub data: TrainingData<T>,
    thresholds: Thresholds<T>,
}

impl<T: Scalar> Trainer<T> {
    /// Fresh model on the dataset's training views.
    pub fn new(config: TrainConfig, model_config: ModelConfig, dataset: &Dataset) -> Result<Self> {
        let views = dataset.meta.view_indices(Split::Train);
        Self::with_views(config, model_config, dataset, &views)
    }

    pub fn with_views(config: TrainConfig, model_config: ModelConfig, dataset: &Dataset, views: &[usize]) -> Result<Self> {
        config.validate()?;
        let mut rng = SeedTree::new(config.seed).stream("init");
        let model = SceneModel::new(model_config, &mut rng)?;
        Self::from_model(config, model, None, dataset, views)
    }

    /// Continues from `model` (and optimizer moments, if given) with a
    /// restarted schedule.
    pub fn from_model(
        config: TrainConfig,
        model: SceneModel<T>,
        adam: Option<AdamState<T>>,
        dataset: &Dataset,
        views: &[usize],
    ) -> Result<Self> {
        config.validate()?;
        let mut data = TrainingData::new(dataset, views)?;
        let windows = if config.initial_windows == 0 { data.n_frames - 1 } else { config.initial_windows };
        let state = ScheduleState::new(uniform_edges(0.0, 1.0, windows), &config);
        data.set_edges(&state.edges)?;
        let adam_config = AdamConfig {
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            lr: state.lr,
        };
        let adam = match adam {
            Some(a) if a.shapes() == model.param_shapes() => AdamState { config: adam_config, ..a },
            Some(_) => return Err(Error::Architecture("optimizer state does not match the model".into())),
            None => AdamState::new(adam_config, &model.param_shapes()),
        };
        let thresholds = config.thresholds.unwrap_or(data.thresholds).cast();
        Ok(Self {
            config,
            model,
            adam,
            state,
            data,
            thresholds,
        })
    }

    /// Samples a window and rays, renders, backpropagates the dead-zone
    /// loss and applies one Adam step. Deterministic in (seed, iteration).
    pub fn train_step(&mut self) -> Result<StepReport> {
        let it = self.state.iteration;
        let mut rng = SeedTree::new(self.config.seed).indexed("train", it);
        let k = rng.gen_range(0..self.state.admissible);
        let window = self.state.window(k);
        let frames: Vec<&DeltaLFrame<f64>> = self.data.frames.iter().map(|f| &f[k]).collect();
        let crop = self.state.crop_active.then_some(self.data.crops.as_slice());
        let samples = sample_rays(
            &frames,
            self.config.rays_per_iteration,
            self.config.positive_fraction,
            crop,
            &mut rng,
        );
        let mut rays = Vec::with_capacity(samples.len());
        let mut targets = Vec::with_capacity(samples.len());
        for s in &samples {
            rays.push(self.data.cameras[s.view].ray(s.x, s.y)?);
            targets.push(T::lit(frames[s.view].get(s.x as usize, s.y as usize)));
        }
        let jitter_seed: u64 = rng.gen();
        let (loss, grads) = self.loss_and_grads(&rays, &targets, window, self.config.jitter.then_some(jitter_seed))?;
        let loss = loss.as_f64();
        if !loss.is_finite() || !grads.all_finite() {
            let views: Vec<usize> = samples.iter().map(|s| self.data.views[s.view]).collect();
            return Err(Error::NonFinite(format!(
                "loss {loss} at iteration {it}, window [{}, {}), {} rays (first pixels {:?}, views {:?})",
                window.0,
                window.1,
                samples.len(),
                &samples.iter().take(4).map(|s| (s.x, s.y)).collect::<Vec<_>>(),
                &views[..views.len().min(4)]
            )));
        }
        self.adam.config.lr = self.state.lr;
        adam_step(&mut self.model.param_slices_mut(), &grads.slices(), &mut self.adam)?;
        if !self.model.all_finite() {
            return Err(Error::NonFinite(format!("parameters diverged at iteration {it}")));
        }
        let report = StepReport {
            iteration: it,
            lr: self.state.lr,
            window,
            loss,
        };
        self.state = schedule_tick(&self.state, &self.config);
        self.data.set_edges(&self.state.edges)?;
        Ok(report)
    }

    /// Mean dead-zone loss of `rays` against `targets` and its parameter
    /// gradient. Chunks render in parallel; partial gradients are summed
    /// in chunk order.
    pub fn loss_and_grads(
        &self,
        rays: &[crate::radiance::Ray<T>],
        targets: &[T],
        window: (f64, f64),
        jitter: Option<u64>,
    ) -> Result<(T, ParamGrads<T>)> {
        let scale = T::one() / T::lit(rays.len().max(1) as f64);
        let cam = &self.data.cameras[0];
        let (near, far) = (cam.near, cam.far);
        let chunk = self.config.chunk_rays;
        let window = (T::lit(window.0), T::lit(window.1));
        let floor = T::lit(self.data.floor_b);
        let parts: Vec<Result<(T, ParamGrads<T>)>> = rays
            .par_chunks(chunk)
            .zip(targets.par_chunks(chunk))
            .enumerate()
            .map(|(ci, (rs, ts))| {
                let mut jr = jitter.map(|s| SeedTree::new(s).indexed("ray-jitter", ci as u64));
                let batch = self.model.sample_batch(rs, near, far, self.config.samples_per_ray, jr.as_mut());
                let mut tape = Tape::new();
                let d = record_delta_l(&mut tape, &self.model, &batch, window, floor)?;
                let loss = tape.deadzone(d, ts.to_vec(), self.thresholds, scale)?;
                let mut grads = self.model.zero_grads();
                tape.backward(loss, &mut grads)?;
                Ok((tape.value(loss).data[0], grads))
            })
            .collect();
        let mut total = T::zero();
        let mut grads = self.model.zero_grads();
        for p in parts {
            let (l, g) = p?;
            total += l;
            grads.accumulate(&g);
        }
        Ok((total, grads))
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.clone(),
            adam: Some(self.adam.clone()),
            iteration: self.state.iteration,
            seed: self.config.seed,
            schedule: Some(self.state.clone()),
        }
    }
}

/// Output locations and loss history of [`fit`].
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub losses: Vec<StepReport>,
}

/// Runs `trainer` for its configured iteration count, writing
/// `loss.csv` and `ckpt_#######.evck` files into `out_dir`.
pub fn run<T: Scalar>(trainer: &mut Trainer<T>, out_dir: &Path) -> Result<FitOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let log_path = out_dir.join("loss.csv");
    let file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = std::io::BufWriter::new(file);
    writeln!(log, "iteration,lr,window_width,loss").map_err(|e| Error::io(&log_path, e))?;
    let mut checkpoints = Vec::new();
    let mut losses = Vec::with_capacity(trainer.config.total_iterations as usize);
    let total = trainer.config.total_iterations;
    while trainer.state.iteration < total {
        let r = trainer.train_step()?;
        writeln!(log, "{},{:e},{},{:e}", r.iteration, r.lr, r.window.1 - r.window.0, r.loss)
            .map_err(|e| Error::io(&log_path, e))?;
        losses.push(r);
        let done = trainer.state.iteration;
        let every = trainer.config.checkpoint_every;
        if (every > 0 && done % every == 0) || done == total {
            let path = out_dir.join(format!("ckpt_{done:07}.evck"));
            save_checkpoint(&path, &trainer.checkpoint())?;
            checkpoints.push(path);
        }
        if done % 100 == 0 {
            log::info!("iteration {done}/{total} loss {:.5} lr {:.2e}", r.loss, r.lr);
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    let final_checkpoint = checkpoints
        .last()
        .cloned()
        .ok_or_else(|| Error::Contract("training produced no checkpoint".into()))?;
    Ok(FitOutput {
        checkpoints,
        final_checkpoint,
        loss_log: log_path,
        losses,
    })
}

/// Trains a fresh model on `dataset` and writes its outputs to `out_dir`.
pub fn fit<T: Scalar>(config: &TrainConfig, model: &ModelConfig, dataset: &Dataset, out_dir: &Path) -> Result<FitOutput> {
    let mut trainer = Trainer::<T>::new(config.clone(), model.clone(), dataset)?;
    run(&mut trainer, out_dir)
}

/// Loads `checkpoint` (weights and optimizer moments) and continues
/// training on `dataset` with a restarted schedule.
pub fn finetune<T: Scalar>(
    checkpoint: &Path,
    config: &TrainConfig,
    model: &ModelConfig,
    dataset: &Dataset,
    out_dir: &Path,
) -> Result<FitOutput> {
    let ck: Checkpoint<T> = load_checkpoint(checkpoint)?;
    if &ck.model.config != model {
        return Err(Error::Architecture(format!(
            "checkpoint model {:?} does not match configured {:?}",
            ck.model.config, model
        )));
    }
    let views = dataset.meta.view_indices(Split::Train);
    let mut trainer = Trainer::from_model(config.clone(), ck.model, ck.adam, dataset, &views)?;
    run(&mut trainer, out_dir)
}
