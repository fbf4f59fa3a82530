use super::config::TrainConfig;
use crate::events::halve_windows;
use serde::{Deserialize, Serialize};

/// Schedule-derived state for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub iteration: u64,
    /// Current window edges; always a partition of `[0, 1]`.
    pub edges: Vec<f64>,
    /// Windows `0..admissible` may be drawn as targets.
    pub admissible: usize,
    pub crop_active: bool,
    pub lr: f64,
    /// Milestones passed so far.
    pub halvings: usize,
    pub base_edges: Vec<f64>,
}

impl ScheduleState {
    pub fn new(base_edges: Vec<f64>, config: &TrainConfig) -> Self {
        Self::at(0, base_edges, config)
    }

    /// State at `iteration`, from scratch.
    pub fn at(iteration: u64, base_edges: Vec<f64>, config: &TrainConfig) -> Self {
        let halvings = config.milestones.iter().filter(|&&m| m <= iteration).count();
        let mut edges = base_edges.clone();
        for _ in 0..halvings {
            edges = halve_windows(&edges);
        }
        let n = edges.len() - 1;
        let admissible = if iteration >= config.progressive_iterations {
            n
        } else {
            let frac = iteration as f64 / config.progressive_iterations as f64;
            ((frac * n as f64).ceil() as usize).clamp(1, n)
        };
        let lr = if config.warmup_iterations == 0 {
            config.base_lr
        } else {
            config.base_lr * (iteration as f64 / config.warmup_iterations as f64).min(1.0)
        };
        Self {
            iteration,
            edges,
            admissible,
            crop_active: iteration < config.crop_iterations,
            lr,
            halvings,
            base_edges,
        }
    }

    pub fn window_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn window(&self, k: usize) -> (f64, f64) {
        (self.edges[k], self.edges[k + 1])
    }

    /// Width of the first window (all windows share it for uniform edges).
    pub fn window_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

/// Advances the schedule by one iteration.
pub fn schedule_tick(state: &ScheduleState, config: &TrainConfig) -> ScheduleState {
    let next = state.iteration + 1;
    let mut out = ScheduleState::at(next, state.base_edges.clone(), config);
    if out.halvings == state.halvings {
        // keep the exact edge values already in use
        out.edges = state.edges.clone();
    }
    out
}
