//! Bagging committee: K logistic models, each trained on a with-replacement
//! sample of the labeled pool.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{explain_linear, to_ranking, Importance, Ranking};
use crate::linear_model::{train, LinearModel, ProbabilityPair, TrainConfig};
use crate::rationale::WeightVector;

/// Pool size at which [`BootstrapRule::Initial`] draws its reduced sample.
pub const INITIAL_POOL: usize = 10;
/// Sample size drawn from the initial pool.
pub const INITIAL_BOOTSTRAP: usize = 6;

/// Bootstrap sample size as a function of the labeled pool size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapRule {
    /// 6 draws from the initial 10-instance pool, pool size afterwards.
    #[default]
    Initial,
    PoolSize,
    Fixed(usize),
}

impl BootstrapRule {
    pub fn sample_size(&self, pool: usize) -> usize {
        match *self {
            BootstrapRule::Initial if pool == INITIAL_POOL => INITIAL_BOOTSTRAP,
            BootstrapRule::Initial | BootstrapRule::PoolSize => pool,
            BootstrapRule::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    members: Vec<LinearModel>,
    weights: WeightVector,
    bootstrap_seed: u64,
    /// Per member, the positions drawn from the labeled pool.
    samples: Vec<Vec<usize>>,
}

impl Committee {
    /// Assemble from explicit members with uniform weights.
    pub fn from_members(members: Vec<LinearModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::CommitteeTooSmall { min: 1, got: 0 });
        }
        let k = members.len();
        Ok(Self {
            members,
            weights: WeightVector::uniform(k),
            bootstrap_seed: 0,
            samples: Vec::new(),
        })
    }

    pub fn members(&self) -> &[LinearModel] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: WeightVector) -> Result<()> {
        if weights.len() != self.members.len() {
            return Err(Error::LengthMismatch {
                expected: self.members.len(),
                got: weights.len(),
            });
        }
        self.weights = weights;
        Ok(())
    }

    pub fn bootstrap_seed(&self) -> u64 {
        self.bootstrap_seed
    }

    pub fn samples(&self) -> &[Vec<usize>] {
        &self.samples
    }

    pub fn member_predictions(&self, row: &[f64]) -> Result<Vec<ProbabilityPair>> {
        self.members.iter().map(|m| m.predict_proba(row)).collect()
    }

    pub fn member_rankings(&self, row: &[f64], importance: Importance) -> Result<Vec<Ranking>> {
        self.members
            .iter()
            .map(|m| to_ranking(&explain_linear(m, row)?, None, importance))
            .collect()
    }
}

/// Train `k` members on independent bootstrap samples of the labeled pool.
///
/// Member `c` draws from ChaCha stream `c` of `seed`, so the committee is
/// reproducible regardless of how members are scheduled. Weights start
/// uniform.
pub fn retrain(
    rows: &[&[f64]],
    labels: &[u8],
    k: usize,
    rule: BootstrapRule,
    seed: u64,
    config: &TrainConfig,
) -> Result<Committee> {
    if rows.is_empty() {
        return Err(Error::EmptyPool);
    }
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    if k < 2 {
        return Err(Error::CommitteeTooSmall { min: 2, got: k });
    }
    config.validate()?;
    let size = rule.sample_size(rows.len());
    let trained: Vec<(Vec<usize>, LinearModel)> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let sample: Vec<usize> = (0..size).map(|_| rng.random_range(0..rows.len())).collect();
            let sample_rows: Vec<&[f64]> = sample.iter().map(|&i| rows[i]).collect();
            let sample_labels: Vec<u8> = sample.iter().map(|&i| labels[i]).collect();
            train(&sample_rows, &sample_labels, config).map(|m| (sample, m))
        })
        .collect::<Result<_>>()?;
    let (samples, members) = trained.into_iter().unzip();
    Ok(Committee {
        members,
        weights: WeightVector::uniform(k),
        bootstrap_seed: seed,
        samples,
    })
}
