//! The per-query active learning loop as an explicit state machine, shared
//! by the batch simulation and the interactive service.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::committee::{retrain, BootstrapRule, Committee};
use crate::config::ExperimentConfig;
use crate::dataset::SplitPools;
use crate::error::{Error, Result};
use crate::explain::{Importance, Ranking};
use crate::linear_model::{train, LinearModel, TrainConfig};
use crate::rationale::{compute_weights, RationaleRecord, WeightMode, WeightVector};
use crate::sampling::{select_next, select_random, DisagreementVariant, Strategy};

const COMMITTEE_STREAM: u64 = 1;
const SELECTION_STREAM: u64 = 2;

/// SplitMix64 finalizer over (seed, stream, index).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub strategy: Strategy,
    pub committee_size: usize,
    pub bootstrap: BootstrapRule,
    pub committee_train: TrainConfig,
    pub learner_train: TrainConfig,
    pub weight_mode: WeightMode,
    pub disagreement: DisagreementVariant,
    pub importance: Importance,
    pub force_uniform_weights: bool,
    pub seed: u64,
}

impl RunSettings {
    pub fn from_config(config: &ExperimentConfig, strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            committee_size: config.committee_size,
            bootstrap: config.committee.bootstrap,
            committee_train: config.committee.train_config(),
            learner_train: config.learner,
            weight_mode: config.variants.weight_mode,
            disagreement: config.variants.disagreement,
            importance: config.variants.importance,
            force_uniform_weights: config.variants.force_uniform_weights,
            seed,
        }
    }
}

/// Learner quality after one accepted annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    /// 1-based query number.
    pub query: usize,
    pub f1: f64,
    pub accuracy: f64,
    pub selected_index: usize,
}

/// One strategy's pass over one repetition.
///
/// Each iteration: [`next_query`](Self::next_query) retrains the committee,
/// refreshes AL++ weights and selects an instance; [`submit`](Self::submit)
/// adds the annotation, retrains the learner and evaluates it.
#[derive(Debug, Clone)]
pub struct ActiveLearningRun {
    settings: RunSettings,
    pools: SplitPools,
    /// Labels of `pools.labeled()`, position for position.
    labels: Vec<u8>,
    records: Vec<RationaleRecord>,
    committee: Option<Committee>,
    pending: Option<usize>,
    curve: Vec<QueryMetrics>,
    learner: Option<LinearModel>,
}

impl ActiveLearningRun {
    /// The initial labeled pool is labeled with ground truth.
    pub fn new(pools: SplitPools, settings: RunSettings) -> Result<Self> {
        if pools.labeled().is_empty() {
            return Err(Error::EmptyPool);
        }
        let labels = pools.labeled().iter().map(|&i| pools.train.label(i)).collect();
        Ok(Self {
            settings,
            pools,
            labels,
            records: Vec::new(),
            committee: None,
            pending: None,
            curve: Vec::new(),
            learner: None,
        })
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    pub fn pools(&self) -> &SplitPools {
        &self.pools
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn records(&self) -> &[RationaleRecord] {
        &self.records
    }

    pub fn committee(&self) -> Option<&Committee> {
        self.committee.as_ref()
    }

    pub fn learner(&self) -> Option<&LinearModel> {
        self.learner.as_ref()
    }

    pub fn curve(&self) -> &[QueryMetrics] {
        &self.curve
    }

    pub fn pending(&self) -> Option<usize> {
        self.pending
    }

    pub fn queries_done(&self) -> usize {
        self.curve.len()
    }

    fn labeled_rows(&self) -> Vec<&[f64]> {
        self.pools.labeled().iter().map(|&i| self.pools.train.row(i)).collect()
    }

    /// Committee weights for the current state of the run.
    fn current_weights(&self, committee: &Committee) -> Result<WeightVector> {
        if self.settings.strategy != Strategy::Alpp || self.settings.force_uniform_weights {
            return Ok(WeightVector::uniform(committee.len()));
        }
        let window = self.settings.weight_mode.window(&self.records);
        let mut per_member: Vec<Vec<Ranking>> = vec![Vec::with_capacity(window.len()); committee.len()];
        for record in window {
            let row = self.pools.train.row(record.instance_index);
            for (slot, ranking) in per_member
                .iter_mut()
                .zip(committee.member_rankings(row, self.settings.importance)?)
            {
                slot.push(ranking);
            }
        }
        compute_weights(&per_member, window)
    }

    /// Select the next instance to annotate, or `None` once the unlabeled
    /// pool is exhausted. Idempotent while a query is pending.
    pub fn next_query(&mut self) -> Result<Option<usize>> {
        if let Some(p) = self.pending {
            return Ok(Some(p));
        }
        if self.pools.unlabeled().is_empty() {
            return Ok(None);
        }
        let t = self.curve.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.settings.seed, SELECTION_STREAM, t));
        if self.settings.strategy == Strategy::Random {
            // Random sampling never looks at the committee, so skip training one.
            let chosen = select_random(self.pools.unlabeled(), &mut rng)?;
            self.pending = Some(chosen);
            return Ok(Some(chosen));
        }
        let rows = self.labeled_rows();
        let mut committee = retrain(
            &rows,
            &self.labels,
            self.settings.committee_size,
            self.settings.bootstrap,
            derive_seed(self.settings.seed, COMMITTEE_STREAM, t),
            &self.settings.committee_train,
        )?;
        committee.set_weights(self.current_weights(&committee)?)?;
        let chosen = select_next(
            self.settings.strategy,
            &committee,
            &self.pools.train,
            self.pools.unlabeled(),
            &mut rng,
            self.settings.disagreement,
        )?;
        self.committee = Some(committee);
        self.pending = Some(chosen);
        Ok(Some(chosen))
    }

    /// Accept the annotation for the pending query.
    pub fn submit(&mut self, instance_index: usize, label: u8, ranking: Ranking) -> Result<QueryMetrics> {
        match self.pending {
            Some(p) if p == instance_index => {}
            Some(p) => {
                return Err(Error::Config(format!(
                    "annotation for instance {instance_index} but instance {p} is pending"
                )))
            }
            None => return Err(Error::Config("no query is pending".into())),
        }
        if label > 1 {
            return Err(Error::Config(format!("label must be 0 or 1, got {label}")));
        }
        if ranking.universe() != self.pools.train.feature_count() {
            return Err(Error::MismatchedUniverse(format!(
                "ranking over {} features, schema has {}",
                ranking.universe(),
                self.pools.train.feature_count()
            )));
        }
        self.pools.mark_labeled(instance_index)?;
        self.labels.push(label);
        self.records.push(RationaleRecord {
            instance_index,
            annotator_ranking: ranking,
            label,
        });
        self.pending = None;

        let rows = self.labeled_rows();
        let learner = train(&rows, &self.labels, &self.settings.learner_train)?;
        let metrics = learner.evaluate(&self.pools.test)?;
        let point = QueryMetrics {
            query: self.curve.len() + 1,
            f1: metrics.f1,
            accuracy: metrics.accuracy,
            selected_index: instance_index,
        };
        self.learner = Some(learner);
        self.curve.push(point);
        Ok(point)
    }
}
