//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! strategies = ["random", "qbc", "alpp"]
//! queries = 125
//! repetitions = 10
//! committee_size = 10
//! base_seed = 0            # seeds = base_seed + repetition unless `seeds` is set
//! threshold = 0.54
//!
//! [dataset]
//! path = "adult.csv"       # relative to the config file
//! label = "income"
//! positive_label = ">50K"
//! negative_label = "<=50K"
//! [[dataset.features]]
//! name = "age"
//! kind = "numeric"
//!
//! [learner]                # TrainConfig; [committee] adds `bootstrap`
//! learning_rate = 1.0
//!
//! [variants]
//! weight_mode = "history"  # or "latest"
//! disagreement = "weighted-max"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::committee::BootstrapRule;
use crate::dataset::FeatureSchema;
use crate::error::{Error, Result};
use crate::explain::Importance;
use crate::linear_model::TrainConfig;
use crate::rationale::WeightMode;
use crate::sampling::{DisagreementVariant, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: FeatureSchema,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommitteeConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub init_seed: u64,
    pub bootstrap: BootstrapRule,
}

impl Default for CommitteeConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            l2_penalty: t.l2_penalty,
            init_seed: t.init_seed,
            bootstrap: BootstrapRule::default(),
        }
    }
}

impl CommitteeConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2_penalty: self.l2_penalty,
            init_seed: self.init_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Variants {
    pub weight_mode: WeightMode,
    pub disagreement: DisagreementVariant,
    pub importance: Importance,
    /// Pin AL++ weights to 1/K (reduces AL++ to QBC).
    pub force_uniform_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_queries")]
    pub queries: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_committee_size")]
    pub committee_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_top_k: Option<usize>,
    /// Draw a fresh train/test split for every repetition; otherwise only the
    /// initial labeled pool varies and the split comes from `split_seed`.
    #[serde(default = "default_true")]
    pub resplit_per_repetition: bool,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub learner: TrainConfig,
    #[serde(default)]
    pub committee: CommitteeConfig,
    #[serde(default = "default_oracle_train")]
    pub oracle: TrainConfig,
    #[serde(default)]
    pub variants: Variants,
}

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}
fn default_queries() -> usize {
    125
}
fn default_repetitions() -> usize {
    10
}
fn default_committee_size() -> usize {
    10
}
fn default_threshold() -> f64 {
    0.54
}
fn default_true() -> bool {
    true
}

/// The oracle sees the whole training half, so it needs a longer schedule
/// than the small-pool models.
pub fn default_oracle_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 1.0,
        epochs: 5000,
        l2_penalty: 1e-4,
        init_seed: 0,
    }
}

impl ExperimentConfig {
    /// Minimal config over a schema with every other field at its default.
    pub fn new(path: impl Into<PathBuf>, schema: FeatureSchema) -> Self {
        Self {
            dataset: DatasetConfig {
                path: path.into(),
                schema,
            },
            strategies: default_strategies(),
            queries: default_queries(),
            repetitions: default_repetitions(),
            committee_size: default_committee_size(),
            seeds: None,
            base_seed: 0,
            threshold: default_threshold(),
            oracle_top_k: None,
            resplit_per_repetition: true,
            split_seed: 0,
            learner: TrainConfig::default(),
            committee: CommitteeConfig::default(),
            oracle: default_oracle_train(),
            variants: Variants::default(),
        }
    }

    /// Parse and validate. A relative dataset path is resolved against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(dir) = base_dir {
            if cfg.dataset.path.is_relative() {
                cfg.dataset.path = dir.join(&cfg.dataset.path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.schema.validate()?;
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        let unique: HashSet<_> = self.strategies.iter().collect();
        if unique.len() != self.strategies.len() {
            return Err(Error::Config("strategies must not repeat".into()));
        }
        if self.queries == 0 {
            return Err(Error::Config("queries must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repetitions {
                return Err(Error::Config(format!(
                    "{} seeds given for {} repetitions",
                    seeds.len(),
                    self.repetitions
                )));
            }
        }
        if self.committee_size < 2 {
            return Err(Error::CommitteeTooSmall {
                min: 2,
                got: self.committee_size,
            });
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if let Some(k) = self.oracle_top_k {
            let n = self.dataset.schema.feature_count();
            if k == 0 || k > n {
                return Err(Error::TopKOutOfRange { k, features: n });
            }
        }
        if let BootstrapRule::Fixed(0) = self.committee.bootstrap {
            return Err(Error::Config("fixed bootstrap size must be at least 1".into()));
        }
        self.learner.validate()?;
        self.committee.train_config().validate()?;
        self.oracle.validate()?;
        Ok(())
    }

    /// One seed per repetition.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repetitions as u64).map(|i| self.base_seed.wrapping_add(i)).collect(),
        }
    }

    pub fn offset_seeds(&mut self, offset: u64) {
        match &mut self.seeds {
            Some(s) => s.iter_mut().for_each(|v| *v = v.wrapping_add(offset)),
            None => self.base_seed = self.base_seed.wrapping_add(offset),
        }
        self.split_seed = self.split_seed.wrapping_add(offset);
    }
}
