use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::Baseline;
use crate::data::SyntheticConfig;
use crate::diffusion::{TrainConfig, UNetConfig};
use crate::masking::MaskSpec;
use crate::metrics::MetricConfig;
use crate::{Error, Result};

/// Diffusion step counts a run may sweep over.
pub const ALLOWED_STEPS: [usize; 4] = [20, 60, 100, 140];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Diffusion,
    Linear,
    Idw,
    Biharmonic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Diffusion, Method::Linear, Method::Idw, Method::Biharmonic];

    pub fn baseline(self) -> Option<Baseline> {
        match self {
            Method::Diffusion => None,
            Method::Linear => Some(Baseline::Linear),
            Method::Idw => Some(Baseline::Idw),
            Method::Biharmonic => Some(Baseline::Biharmonic),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Diffusion => "diffusion",
            Method::Linear => "linear",
            Method::Idw => "idw",
            Method::Biharmonic => "biharmonic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Where the images come from. A `dir` of CSD1 files takes precedence over
/// the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dir: Option<PathBuf>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            n_train: 1000,
            n_val: 100,
            n_test: 20,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    /// Train missing checkpoints instead of failing.
    pub enabled: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub resample_masks: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            enabled: true,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            resample_masks: t.resample_masks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub base_channels: usize,
    pub levels: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        let u = UNetConfig::new(ALLOWED_STEPS[0]);
        Self {
            base_channels: u.base_channels,
            levels: u.levels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingOptions {
    /// Re-noise measured pixels into the iterate after every reverse step.
    pub replace_known: bool,
}

/// A full experiment sweep, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/checkpoints`.
    pub checkpoint_dir: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Evaluation masks.
    pub masks: Vec<MaskSpec>,
    /// Masks drawn during training; empty means the evaluation masks.
    pub train_masks: Vec<MaskSpec>,
    pub steps: Vec<usize>,
    /// Write per-image reconstructions and ridge overlays.
    pub save_images: bool,
    pub data: DataConfig,
    pub train: TrainOptions,
    pub model: ModelOptions,
    pub sampling: SamplingOptions,
    pub metrics: MetricConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            checkpoint_dir: None,
            methods: Method::ALL.to_vec(),
            masks: vec![MaskSpec::line_cut(8, 8, 4, 4), MaskSpec::line_cut(4, 4, 8, 8)],
            train_masks: Vec::new(),
            steps: vec![60],
            save_images: true,
            data: DataConfig::default(),
            train: TrainOptions::default(),
            model: ModelOptions::default(),
            sampling: SamplingOptions::default(),
            metrics: MetricConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.masks.is_empty() {
            return Err(Error::Config("methods and masks must be nonempty".into()));
        }
        if self.uses_diffusion() {
            if self.steps.is_empty() {
                return Err(Error::Config("steps must be nonempty for diffusion".into()));
            }
            if let Some(s) = self.steps.iter().find(|s| !ALLOWED_STEPS.contains(s)) {
                return Err(Error::Config(format!("steps {s} not in {ALLOWED_STEPS:?}")));
            }
            self.unet(self.steps[0]).validate()?;
        }
        if self.data.dir.is_none() {
            self.data.synthetic.validate()?;
            if self.data.n_test == 0 || self.data.n_train == 0 {
                return Err(Error::Config("synthetic data needs n_train, n_test > 0".into()));
            }
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return Err(Error::Config("train.batch_size and train.epochs must be positive".into()));
        }
        if !(self.train.learning_rate > 0.0) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn uses_diffusion(&self) -> bool {
        self.methods.contains(&Method::Diffusion)
    }

    pub fn unet(&self, steps: usize) -> UNetConfig {
        UNetConfig {
            base_channels: self.model.base_channels,
            levels: self.model.levels,
            ..UNetConfig::new(steps)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.seed,
            resample_masks: self.train.resample_masks,
        }
    }

    pub fn training_masks(&self) -> &[MaskSpec] {
        if self.train_masks.is_empty() {
            &self.masks
        } else {
            &self.train_masks
        }
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.checkpoint_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("checkpoints"))
    }

    pub fn checkpoint_path(&self, steps: usize) -> PathBuf {
        self.checkpoint_dir().join(format!("unet-T{steps}.qddm"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 7\nmethods = [\"linear\", \"idw\"]\nmasks = [\"grid:5\"]\n[data]\nn_test = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.masks, vec![MaskSpec::grid(5)]);
        assert_eq!(cfg.data.n_test, 3);
        assert_eq!(cfg.data.n_train, 1000);
        assert_eq!(cfg.training_masks(), &cfg.masks[..]);
    }

    #[test]
    fn invalid_configs_rejected() {
        for text in [
            "methods = []",
            "masks = []",
            "steps = [30]",
            "masks = [\"grid:x\"]",
            "methods = [\"cubic\"]",
            "unknown_key = 1",
            "[train]\nbatch_size = 0",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
        // step list only matters when diffusion runs
        assert!(ExperimentConfig::from_toml("methods = [\"idw\"]\nsteps = []").is_ok());
    }

    #[test]
    fn checkpoint_paths() {
        let cfg = ExperimentConfig {
            output_dir: "out".into(),
            ..Default::default()
        };
        assert_eq!(cfg.checkpoint_path(60), PathBuf::from("out/checkpoints/unet-T60.qddm"));
    }
}
