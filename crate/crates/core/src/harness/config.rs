//! Declarative run configuration, read from and written to TOML.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{self, ExperimentPreset, MetricChannels, SubRange, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::loss::GridSpec;
use crate::model::{MssModel, RateMatrix};
use crate::network::NetworkArchitecture;
use crate::optim::{AdamConfig, LearningRateSchedule};

/// How the loss is split into PCGrad tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskGranularity {
    /// `L_u` and `L_f`.
    #[default]
    TwoGroups,
    /// `L_u` and one residual task per state.
    PerState,
}

/// A homogeneous chain given inline in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub name: String,
    #[serde(default = "default_time_unit")]
    pub time_unit: String,
    pub initial: Vec<f64>,
    pub generator: Vec<Vec<f64>>,
    #[serde(default)]
    pub performance: Option<Vec<f64>>,
}

fn default_time_unit() -> String {
    "time".into()
}

/// Weibull shape parameters for `example2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeibullShapes {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for WeibullShapes {
    fn default() -> Self {
        Self { alpha: 2.0, beta: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Catalog name, or `custom` together with `[custom_model]`.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_model: Option<CustomModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weibull: Option<WeibullShapes>,
    pub collocation: GridSpec,
    pub evaluation: GridSpec,
    pub iterations: usize,
    pub schedule: LearningRateSchedule,
    pub pcgrad: bool,
    #[serde(default)]
    pub task_granularity: TaskGranularity,
    /// Residual weight `W` of `L_u + W·L_f`; ignored when `pcgrad` is set.
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_log_interval")]
    pub log_interval: usize,
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: usize,
    #[serde(default = "default_channels")]
    pub channels: MetricChannels,
    #[serde(default)]
    pub sub_ranges: Vec<SubRange>,
    /// Directory for logs and checkpoints; nothing is written when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn one() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_hidden() -> Vec<usize> {
    vec![50, 50]
}
fn default_log_interval() -> usize {
    100
}
fn default_checkpoint_interval() -> usize {
    10000
}
fn default_channels() -> MetricChannels {
    MetricChannels::States
}

impl TrainingConfig {
    pub fn from_preset(p: &ExperimentPreset) -> Self {
        Self {
            model: p.model.clone(),
            custom_model: None,
            weibull: (p.model == "example2").then(WeibullShapes::default),
            collocation: p.collocation,
            evaluation: p.evaluation,
            iterations: p.training_iterations,
            schedule: p.schedule.clone(),
            pcgrad: p.pcgrad,
            task_granularity: TaskGranularity::TwoGroups,
            weight: 1.0,
            seed: p.seed,
            hidden_layers: default_hidden(),
            adam: AdamConfig::default(),
            clip_norm: None,
            log_interval: default_log_interval(),
            checkpoint_interval: default_checkpoint_interval(),
            channels: p.channels,
            sub_ranges: p.sub_ranges.clone(),
            output_dir: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        catalog::preset(name).map(|p| Self::from_preset(&p))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Hex SHA-256 of the canonical TOML rendering, ignoring `output_dir`.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let d = Sha256::digest(c.to_toml().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if !(self.weight > 0.0) {
            return Err(Error::config(format!("loss weight must be positive, got {}", self.weight)));
        }
        if self.log_interval == 0 || self.checkpoint_interval == 0 {
            return Err(Error::config("log and checkpoint intervals must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm must be positive"));
            }
        }
        self.schedule.validate()?;
        self.collocation.validate().map_err(|e| Error::config(format!("collocation: {e}")))?;
        self.evaluation.validate().map_err(|e| Error::config(format!("evaluation: {e}")))?;
        if !(self.collocation.t_end > 0.0) {
            return Err(Error::config("collocation interval must end after 0"));
        }
        if self.model == "custom" && self.custom_model.is_none() {
            return Err(Error::config("model = \"custom\" needs a [custom_model] table"));
        }
        if self.model != "custom" && self.custom_model.is_some() {
            return Err(Error::config("[custom_model] is only read when model = \"custom\""));
        }
        NetworkArchitecture::new(self.hidden_layers.clone(), 2).map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<MssModel> {
        match (self.model.as_str(), &self.custom_model) {
            ("custom", Some(c)) => {
                let q = RateMatrix::from_rows(&c.generator)?;
                let mut m = MssModel::homogeneous(c.name.clone(), c.initial.clone(), q)?
                    .with_time_unit(c.time_unit.clone());
                if let Some(g) = &c.performance {
                    m = m.with_performance(g.clone())?;
                }
                let report = crate::model::validate_model(&m, &[0.0]);
                if let Some(v) = report.violations.first() {
                    return Err(Error::config(format!("custom generator: {v}")));
                }
                Ok(m)
            }
            ("custom", None) => Err(Error::config("model = \"custom\" needs a [custom_model] table")),
            ("example2", _) => {
                let w = self.weibull.unwrap_or_default();
                if !(w.alpha > 0.0 && w.beta > 0.0) {
                    return Err(Error::config("Weibull shapes must be positive"));
                }
                Ok(catalog::build_example2(w.alpha, w.beta))
            }
            (name, _) => catalog::build(name),
        }
    }

    pub fn architecture(&self, num_states: usize) -> Result<NetworkArchitecture> {
        NetworkArchitecture::new(self.hidden_layers.clone(), num_states)
    }
}
