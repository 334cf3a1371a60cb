use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::ScheduleConfig;
use crate::error::{Error, Result};
use crate::metrics::EvalConfig;
use crate::model::DenoiserConfig;
use crate::motion::{ContactConfig, Skeleton};
use crate::train::{LossWeights, TrainConfig};

/// Which skeleton a run uses: a bundled one by name or a skeleton file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkeletonRef(pub String);

impl Default for SkeletonRef {
    fn default() -> Self {
        Self("smpl24".into())
    }
}

impl SkeletonRef {
    /// `smpl24`, `toy5`, or a path to a skeleton JSON file, resolved
    /// relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<Skeleton> {
        match self.0.as_str() {
            "smpl24" => Ok(Skeleton::smpl24()),
            "toy5" => Ok(Skeleton::toy5()),
            path => Skeleton::load(base.join(path)),
        }
    }
}

/// `data.*` keys: where training data comes from, or how to synthesize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset manifest; when absent, `train` synthesizes a dataset first.
    pub manifest: Option<PathBuf>,
    pub skeleton: SkeletonRef,
    pub sequences: usize,
    pub genres: usize,
    pub duration_s: f64,
    pub fps: f64,
    /// Fraction of sequences held out, rounded up.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            skeleton: SkeletonRef::default(),
            sequences: 64,
            genres: 2,
            duration_s: 20.0,
            fps: 60.0,
            test_fraction: 0.05,
            seed: 0,
        }
    }
}

/// `generation.*` keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub length_s: f64,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { length_s: 20.0, seed: 0 }
    }
}

/// Every setting of a run. Each key has a default; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub model: DenoiserConfig,
    pub diffusion: ScheduleConfig,
    pub training: TrainConfig,
    pub loss: LossWeights,
    pub contacts: ContactConfig,
    pub metrics: EvalConfig,
    pub data: DataConfig,
    pub generation: GenerationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs/default"),
            model: DenoiserConfig::default(),
            diffusion: ScheduleConfig::default(),
            training: TrainConfig::default(),
            loss: LossWeights::default(),
            contacts: ContactConfig::default(),
            metrics: EvalConfig::default(),
            data: DataConfig::default(),
            generation: GenerationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Full-scale settings: width 512, 1000 diffusion steps, batch 126.
    pub fn paper() -> Self {
        Self {
            model: DenoiserConfig::paper(),
            diffusion: ScheduleConfig::paper(),
            training: TrainConfig::paper(),
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file. With `paper`, keys absent from the file take the
    /// full-scale values instead of the desk-scale defaults.
    pub fn load(path: &Path, paper: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        if !paper {
            return Ok(cfg);
        }
        let file: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::paper()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, file);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
