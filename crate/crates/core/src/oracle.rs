//! Label + rationale sources.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::explain::{explain_linear, to_ranking, Importance, Ranking};
use crate::linear_model::{train_on, LinearModel, Metrics, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleSource {
    Simulated,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub label: u8,
    pub ranking: Ranking,
    pub source: OracleSource,
}

/// Stand-in annotator: a logistic model fitted on the whole training half.
/// It labels with its own prediction and justifies with its own explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedOracle {
    model: LinearModel,
    importance: Importance,
}

impl SimulatedOracle {
    pub fn build(train: &TabularDataset, config: &TrainConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyPool);
        }
        let positives = train.labels().iter().filter(|&&l| l == 1).count();
        if positives == 0 || positives == train.len() {
            return Err(Error::SingleClassOracle);
        }
        Ok(Self {
            model: train_on(train, config)?,
            importance: Importance::Absolute,
        })
    }

    pub fn from_model(model: LinearModel) -> Self {
        Self {
            model,
            importance: Importance::Absolute,
        }
    }

    pub fn with_importance(mut self, importance: Importance) -> Self {
        self.importance = importance;
        self
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn evaluate(&self, test: &TabularDataset) -> Result<Metrics> {
        self.model.evaluate(test)
    }

    pub fn answer(&self, row: &[f64], k: Option<usize>) -> Result<OracleResponse> {
        Ok(OracleResponse {
            label: self.model.predict_label(row)?,
            ranking: to_ranking(&explain_linear(&self.model, row)?, k, self.importance)?,
            source: OracleSource::Simulated,
        })
    }
}
