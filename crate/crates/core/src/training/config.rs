use crate::error::{Error, Result};
use crate::events::Thresholds;
use serde::{Deserialize, Serialize};

/// Training schedule and batch settings. Defaults are the desk-scale run:
/// 20k iterations with windows halved at 10k and 15k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub total_iterations: u64,
    pub rays_per_iteration: usize,
    pub positive_fraction: f64,
    pub base_lr: f64,
    pub warmup_iterations: u64,
    pub crop_iterations: u64,
    pub progressive_iterations: u64,
    /// Iterations at which every training window is split in half.
    pub milestones: Vec<u64>,
    /// Initial window count; 0 uses one window per stored frame interval.
    pub initial_windows: usize,
    /// Loss thresholds; defaults to the dataset's.
    pub thresholds: Option<Thresholds>,
    pub seed: u64,
    pub samples_per_ray: usize,
    pub jitter: bool,
    /// Rays per tape; chunks render in parallel and reduce in order.
    pub chunk_rays: usize,
    /// 0 disables periodic checkpoints (the final one is always written).
    pub checkpoint_every: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 20_000,
            rays_per_iteration: 1024,
            positive_fraction: 0.5,
            base_lr: 5e-4,
            warmup_iterations: 100,
            crop_iterations: 200,
            progressive_iterations: 2000,
            milestones: vec![10_000, 15_000],
            initial_windows: 0,
            thresholds: None,
            seed: 0,
            samples_per_ray: 32,
            jitter: true,
            chunk_rays: 128,
            checkpoint_every: 5000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_iterations == 0 || self.rays_per_iteration == 0 {
            return Err(Error::Config("total_iterations and rays_per_iteration must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return Err(Error::Config(format!("positive_fraction {} outside [0, 1]", self.positive_fraction)));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("milestones must be strictly increasing".into()));
        }
        if self.milestones.last().is_some_and(|&m| m >= self.total_iterations) {
            return Err(Error::Config("milestones must come before total_iterations".into()));
        }
        if !(self.base_lr > 0.0) || self.samples_per_ray < 2 || self.chunk_rays == 0 {
            return Err(Error::Config("need base_lr > 0, samples_per_ray >= 2, chunk_rays >= 1".into()));
        }
        Ok(())
    }
}
