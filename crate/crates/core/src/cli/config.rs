use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetPlan, Split};
use crate::error::{Error, Result};
use crate::eval::EvalMode;
use crate::model::ModelConfig;
use crate::synth::{LabelRule, SceneSpec};
use crate::train::TrainConfig;

/// Environment variable naming the default output root when neither a flag
/// nor the config file gives one.
pub const OUT_DIR_ENV: &str = "GSP_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalModeKind {
    #[default]
    Full,
    Tiled,
}

impl std::str::FromStr for EvalModeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(EvalModeKind::Full),
            "tiled" => Ok(EvalModeKind::Tiled),
            other => Err(Error::Config(format!("unknown eval mode {other:?} (expected full|tiled)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mode: EvalModeKind,
    /// Tile side in tiled mode.
    pub patch_size: usize,
    pub rule: LabelRule,
    pub split: Split,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalModeKind::Full,
            patch_size: 48,
            rule: LabelRule::Dots,
            split: Split::Test,
        }
    }
}

impl EvalConfig {
    pub fn eval_mode(&self) -> EvalMode {
        match self.mode {
            EvalModeKind::Full => EvalMode::Full,
            EvalModeKind::Tiled => EvalMode::Tiled(self.patch_size),
        }
    }
}

/// One TOML file describing a whole experiment. Every section is optional.
///
/// A top-level `seed`, when present, replaces the dataset seed and the seeds
/// in `[model]` and `[train]`, so a single number reproduces a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub scene: SceneSpec,
    pub data: DatasetPlan,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Dataset generation seed.
    pub fn data_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Sets the master seed and propagates it to the model and trainer.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.apply_seed();
    }

    pub fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.model.seed = s;
            self.train.seed = s;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.eval.patch_size == 0 {
            return Err(Error::Config("eval: patch_size must be >= 1".into()));
        }
        Ok(())
    }
}
