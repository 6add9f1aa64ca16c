//! Pool-based active learning where the annotator supplies a feature ranking
//! alongside each label.
//!
//! A bagging committee of logistic models picks the next query by max
//! disagreement. Each member is weighted by how well its local explanation
//! ranking agrees (Kendall tau) with the rankings the annotator has given so
//! far, so members whose reasoning matches the annotator dominate the
//! consensus.

pub mod committee;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod linear_model;
pub mod oracle;
pub mod rationale;
pub mod sampling;

pub use committee::{BootstrapRule, Committee};
pub use config::ExperimentConfig;
pub use dataset::{FeatureKind, FeatureSchema, FeatureSpec, SplitPools, TabularDataset};
pub use error::{Error, Result};
pub use explain::{Explanation, Importance, Ranking};
pub use linear_model::{LinearModel, Metrics, ProbabilityPair, TrainConfig};
pub use oracle::{OracleResponse, OracleSource, SimulatedOracle};
pub use rationale::{RationaleRecord, WeightMode, WeightVector};
pub use sampling::{DisagreementVariant, Strategy};
