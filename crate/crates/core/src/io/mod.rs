//! File formats: eventstreams, rasters, datasets, checkpoints and configs.

pub mod csv;
pub mod dataset;
pub mod evd1;
pub mod image;

pub use self::csv::{format_events_csv, parse_events_csv, read_events_csv};
pub use dataset::{dataset_hash, Dataset, DatasetMeta, Split};
pub use evd1::{decode_events, encode_events, read_events, write_events};
pub mod checkpoint;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub mod config;
pub mod manifest;
pub use config::{Precision, RunConfig, SceneSection};
pub use manifest::RunManifest;
