//! Event-supervised dynamic radiance fields.
//!
//! The crate converts eventstreams into quantized log-brightness change
//! frames, trains a deformation network plus canonical radiance field
//! directly against those frames, and renders predicted events for new
//! viewpoints and time windows.

pub mod error;
pub mod events;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod radiance;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Package version plus `git describe` output when built from a checkout.
pub const VERSION: &str = env!("EVFIELD_VERSION");

/// Single-precision scene model; the fast path for training.
pub type SceneModel32 = radiance::SceneModel<f32>;
/// Double-precision scene model, used for gradient checks.
pub type SceneModel64 = radiance::SceneModel<f64>;
pub type Trainer32 = training::Trainer<f32>;
pub type Trainer64 = training::Trainer<f64>;
pub type Checkpoint32 = io::Checkpoint<f32>;
pub type Checkpoint64 = io::Checkpoint<f64>;
pub type DeltaLFrame32 = events::DeltaLFrame<f32>;
pub type DeltaLFrame64 = events::DeltaLFrame<f64>;
