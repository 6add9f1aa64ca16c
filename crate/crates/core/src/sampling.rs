//! Query selection: random, vanilla max-disagreement QBC, and
//! rationale-weighted max disagreement.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::committee::Committee;
use crate::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::linear_model::ProbabilityPair;
use crate::rationale::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Random,
    Qbc,
    Alpp,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Random, Strategy::Qbc, Strategy::Alpp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Qbc => "qbc",
            Strategy::Alpp => "alpp",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "qbc" => Ok(Strategy::Qbc),
            "alpp" | "al++" => Ok(Strategy::Alpp),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected random, qbc or alpp)"
            ))),
        }
    }
}

/// How weighted per-member divergences are aggregated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisagreementVariant {
    /// `max_c w_c * KL(P_c || P_w)`
    #[default]
    WeightedMax,
    /// `sum_c w_c * KL(P_c || P_w)`
    WeightedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub instance_index: usize,
    pub score: f64,
}

/// `sum_y p(y) ln(p(y)/q(y))` in nats, with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &ProbabilityPair, q: &ProbabilityPair) -> Result<f64> {
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::UndefinedDivergence { index });
            }
            total += pi * (pi / qi).ln();
        }
    }
    // Rounding can leave a tiny negative value for p ~ q.
    Ok(total.max(0.0))
}

fn consensus(predictions: &[ProbabilityPair], weights: &[f64]) -> ProbabilityPair {
    let mut mean = [0.0; 2];
    for (p, w) in predictions.iter().zip(weights) {
        mean[0] += w * p[0];
        mean[1] += w * p[1];
    }
    mean
}

/// `max_c KL(P_c || mean_c P_c)`.
pub fn vanilla_max_disagreement(predictions: &[ProbabilityPair]) -> Result<f64> {
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let uniform = vec![1.0 / predictions.len() as f64; predictions.len()];
    let mean = consensus(predictions, &uniform);
    predictions
        .iter()
        .map(|p| kl_divergence(p, &mean))
        .try_fold(0.0f64, |acc, kl| Ok(acc.max(kl?)))
}

/// Weighted disagreement against the weighted consensus `sum_c w_c P_c`.
pub fn weighted_disagreement(
    predictions: &[ProbabilityPair],
    weights: &[f64],
    variant: DisagreementVariant,
) -> Result<f64> {
    if predictions.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            got: weights.len(),
        });
    }
    let mean = consensus(predictions, weights);
    let mut score = 0.0f64;
    for (p, &w) in predictions.iter().zip(weights) {
        // A member with zero weight contributes nothing, even if its
        // divergence is undefined against the consensus.
        if w == 0.0 {
            continue;
        }
        let term = w * kl_divergence(p, &mean)?;
        score = match variant {
            DisagreementVariant::WeightedMax => score.max(term),
            DisagreementVariant::WeightedSum => score + term,
        };
    }
    Ok(score)
}

pub fn weighted_max_disagreement(predictions: &[ProbabilityPair], weights: &WeightVector) -> Result<f64> {
    weighted_disagreement(predictions, weights.as_slice(), DisagreementVariant::WeightedMax)
}

/// Score every candidate. The QBC score is computed through the weighted
/// path with uniform weights, which is the vanilla score divided by K and
/// therefore has the same argmax.
pub fn score_candidates(
    strategy: Strategy,
    committee: &Committee,
    train: &TabularDataset,
    candidates: &[usize],
    variant: DisagreementVariant,
) -> Result<Vec<CandidateScore>> {
    let weights = match strategy {
        Strategy::Alpp => committee.weights().clone(),
        Strategy::Qbc | Strategy::Random => WeightVector::uniform(committee.len()),
    };
    candidates
        .par_iter()
        .map(|&i| {
            let preds = committee.member_predictions(train.row(i))?;
            let score = weighted_disagreement(&preds, weights.as_slice(), variant)?;
            Ok(CandidateScore {
                instance_index: i,
                score,
            })
        })
        .collect()
}

/// Highest score wins; ties go to the lowest instance index.
pub fn argmax(scores: &[CandidateScore]) -> Option<usize> {
    scores
        .iter()
        .fold(None::<&CandidateScore>, |best, s| match best {
            Some(b) if s.score < b.score || (s.score == b.score && s.instance_index > b.instance_index) => Some(b),
            _ => Some(s),
        })
        .map(|s| s.instance_index)
}

/// Uniform draw from the pool.
pub fn select_random<R: Rng>(unlabeled: &[usize], rng: &mut R) -> Result<usize> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(unlabeled[rng.random_range(0..unlabeled.len())])
}

/// Pick the next query from `unlabeled`. `rng` is consumed only by the
/// random strategy.
pub fn select_next<R: Rng>(
    strategy: Strategy,
    committee: &Committee,
    train: &TabularDataset,
    unlabeled: &[usize],
    rng: &mut R,
    variant: DisagreementVariant,
) -> Result<usize> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    match strategy {
        Strategy::Random => select_random(unlabeled, rng),
        Strategy::Qbc | Strategy::Alpp => {
            let scores = score_candidates(strategy, committee, train, unlabeled, variant)?;
            argmax(&scores).ok_or(Error::EmptyPool)
        }
    }
}
