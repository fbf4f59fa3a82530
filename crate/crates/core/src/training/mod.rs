//! The dead-zone loss, ray sampling, schedule and training loop.

mod config;
pub mod loss;
mod rays;
mod schedule;
mod trainer;

pub use config::TrainConfig;
pub use loss::{deadzone_loss, deadzone_term};
pub use rays::{sample_rays, RaySample, Rect};
pub use schedule::{schedule_tick, ScheduleState};
pub use trainer::{finetune, fit, run, FitOutput, StepReport, Trainer, TrainingData};
