//! TOML run configuration. Every section rejects unknown keys.

use crate::error::{Error, Result};
use crate::metrics::EvalOptions;
use crate::radiance::ModelConfig;
use crate::synth::{AnalyticScene, DatasetConfig, Primitive};
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Either a named preset or an explicit primitive list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub preset: String,
    pub bound: f64,
    pub primitives: Vec<Primitive>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            preset: "translating_sphere".into(),
            bound: 4.0,
            primitives: Vec::new(),
        }
    }
}

impl SceneSection {
    pub fn build(&self) -> Result<AnalyticScene> {
        if self.primitives.is_empty() {
            let mut scene = AnalyticScene::preset(&self.preset)?;
            scene.bound = self.bound;
            scene.validate()?;
            Ok(scene)
        } else {
            AnalyticScene::new(self.bound, self.primitives.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Scalar type used for training and rendering.
    pub precision: Precision,
    pub scene: SceneSection,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        cfg.dataset.validate().map_err(|e| Error::Config(e.to_string()))?;
        if cfg.model.bound != cfg.scene.bound {
            return Err(Error::Config(format!(
                "model.bound {} differs from scene.bound {}",
                cfg.model.bound, cfg.scene.bound
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
