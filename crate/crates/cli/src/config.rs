//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use pu_kit::learn::ModelSpec;
use pu_kit::mpe::{BbeConfig, ScottConfig};
use pu_kit::synth::TaskSpec;
use pu_kit::tedn::{TednConfig, DEFAULT_WARM_START_EPOCHS};
use pu_kit::{RandomSeed, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::mnist::MnistSpec;

/// Environment variable that replaces the `seeds` list with a single seed.
pub const SEED_ENV: &str = "PU_KIT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bbe,
    Scott,
    Naive,
    /// CVIR given the true mixture proportion.
    Cvir,
    Pvu,
    Tedn,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Bbe, Method::Scott, Method::Naive, Method::Cvir, Method::Pvu, Method::Tedn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bbe => "bbe",
            Method::Scott => "scott",
            Method::Naive => "naive",
            Method::Cvir => "cvir",
            Method::Pvu => "pvu",
            Method::Tedn => "tedn",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Single-shot estimators that only need scores.
    pub fn is_estimator(self) -> bool {
        matches!(self, Method::Bbe | Method::Scott | Method::Naive)
    }

    /// Methods reported on their final model rather than an oracle-chosen epoch.
    pub fn reports_final_model(self) -> bool {
        matches!(self, Method::Cvir | Method::Tedn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the single-shot estimators obtain scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    /// Warm-start a model on the training split and score the hold-out split.
    #[default]
    Pvu,
    /// Sigmoid of the first feature, on all samples. Monotone in that
    /// feature, which is all the estimators depend on.
    FirstFeature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub stop_on_convergence: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            weight_decay: d.weight_decay,
            batch_size: d.batch_size,
            epochs: d.epochs,
            stop_on_convergence: d.stop_on_convergence,
        }
    }
}

impl TrainSection {
    pub fn with_seed(&self, seed: RandomSeed) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            stop_on_convergence: self.stop_on_convergence,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TednSection {
    pub warm_start_epochs: usize,
    pub split_fraction: f64,
    pub max_epochs: usize,
}

impl Default for TednSection {
    fn default() -> Self {
        let d = TednConfig::default();
        TednSection {
            warm_start_epochs: DEFAULT_WARM_START_EPOCHS,
            split_fraction: d.split_fraction,
            max_epochs: d.max_epochs,
        }
    }
}

fn default_eval_size() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist: Option<MnistSpec>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Size of the labeled evaluation set drawn for synthetic tasks.
    #[serde(default = "default_eval_size")]
    pub eval_size: usize,
    #[serde(default)]
    pub scorer: Scorer,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub bbe: BbeConfig,
    #[serde(default)]
    pub scott: ScottConfig,
    #[serde(default)]
    pub tedn: TednSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            CliError::config(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        ExperimentConfig::from_toml(&text)
    }

    /// Applies [`SEED_ENV`] when it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse::<u64>()
                .map_err(|_| CliError::config(SEED_ENV, format!("expected an unsigned integer, got {v:?}")))?;
            self.seeds = vec![seed];
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CliError::config("methods", "at least one method is required"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "at least one seed is required"));
        }
        match (&self.task, &self.mnist) {
            (Some(t), None) => t.validate().map_err(|e| CliError::config("task", e.to_string()))?,
            (None, Some(m)) => m.validate()?,
            (None, None) => return Err(CliError::config("task", "either [task] or [mnist] is required")),
            (Some(_), Some(_)) => return Err(CliError::config("mnist", "[task] and [mnist] are mutually exclusive")),
        }
        if self.eval_size == 0 {
            return Err(CliError::config("eval_size", "must be >= 1"));
        }
        if self.model.hidden == 0 {
            return Err(CliError::config("model.hidden", "must be >= 1"));
        }
        self.train
            .with_seed(RandomSeed(0))
            .validate()
            .map_err(|e| CliError::config("train", e.to_string()))?;
        self.bbe.validate().map_err(|e| CliError::config("bbe", e.to_string()))?;
        if !(self.scott.delta > 0.0 && self.scott.delta < 1.0) {
            return Err(CliError::config("scott.delta", "must lie in (0,1)"));
        }
        if !(self.tedn.split_fraction > 0.0 && self.tedn.split_fraction < 1.0) {
            return Err(CliError::config("tedn.split_fraction", "must lie in (0,1)"));
        }
        Ok(())
    }

    pub fn tedn_config(&self, seed: RandomSeed) -> TednConfig {
        TednConfig {
            warm_start_epochs: self.tedn.warm_start_epochs,
            bbe: self.bbe,
            split_fraction: self.tedn.split_fraction,
            train: self.train.with_seed(seed),
            max_epochs: self.tedn.max_epochs,
        }
    }
}
