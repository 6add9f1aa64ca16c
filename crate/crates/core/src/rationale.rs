//! Agreement between annotator rationales and committee explanations, and
//! the committee weights derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::Ranking;

/// One annotated query: the label and the annotator's feature ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleRecord {
    pub instance_index: usize,
    pub annotator_ranking: Ranking,
    pub label: u8,
}

/// Which rationale records feed the agreement average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Mean over every record collected so far.
    #[default]
    History,
    /// Only the most recent record.
    Latest,
}

impl WeightMode {
    pub fn window<'a>(&self, records: &'a [RationaleRecord]) -> &'a [RationaleRecord] {
        match self {
            WeightMode::History => records,
            WeightMode::Latest => &records[records.len().saturating_sub(1)..],
        }
    }
}

/// Tau-b over paired scores, O(n^2). Returns 0 when fewer than two items
/// or when one side is entirely tied.
pub fn tau_b(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let (mut concordant, mut discordant) = (0u64, 0u64);
    let (mut tied_x_only, mut tied_y_only) = (0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tied_x_only += 1,
                (false, true) => tied_y_only += 1,
                (false, false) => {
                    if (dx > 0.0) == (dy > 0.0) {
                        concordant += 1;
                    } else {
                        discordant += 1;
                    }
                }
            }
        }
    }
    let untied = (concordant + discordant) as f64;
    let denom = ((untied + tied_x_only as f64) * (untied + tied_y_only as f64)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant as f64 - discordant as f64) / denom
    }
}

/// Kendall tau between two rankings.
///
/// When `a` is a top-k ranking, `b` is restricted to `a`'s features (keeping
/// its relative order) before comparing. For full rankings the result is
/// symmetric.
pub fn kendall_tau(a: &Ranking, b: &Ranking) -> Result<f64> {
    if a.universe() != b.universe() {
        return Err(Error::MismatchedUniverse(format!(
            "{} vs {} features",
            a.universe(),
            b.universe()
        )));
    }
    let mut pos_a = Vec::with_capacity(a.len());
    let mut pos_b = Vec::with_capacity(a.len());
    for (i, &f) in a.features().iter().enumerate() {
        let j = b.position(f).ok_or_else(|| {
            Error::MismatchedUniverse(format!("feature {f} is missing from the compared ranking"))
        })?;
        pos_a.push(i as f64);
        pos_b.push(j as f64);
    }
    Ok(tau_b(&pos_a, &pos_b))
}

/// Non-negative committee weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    /// Validate an explicit weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// `(tau + 1) / 2` per member, L1-normalized; uniform when every score
    /// is zero or there is nothing to average.
    pub fn from_mean_taus(mean_taus: &[f64]) -> Self {
        let scores: Vec<f64> = mean_taus.iter().map(|t| ((t + 1.0) / 2.0).max(0.0)).collect();
        let total: f64 = scores.iter().sum();
        if total > 0.0 && total.is_finite() {
            Self(scores.iter().map(|s| s / total).collect())
        } else {
            Self::uniform(mean_taus.len())
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }
}

/// Committee weights from agreement with the annotator.
///
/// `member_rankings[c][r]` is member `c`'s explanation ranking for the
/// instance of `records[r]`. With no records the weights are uniform.
pub fn compute_weights(member_rankings: &[Vec<Ranking>], records: &[RationaleRecord]) -> Result<WeightVector> {
    let k = member_rankings.len();
    if k == 0 {
        return Err(Error::CommitteeTooSmall { min: 1, got: 0 });
    }
    if records.is_empty() {
        return Ok(WeightVector::uniform(k));
    }
    let mut mean_taus = Vec::with_capacity(k);
    for rankings in member_rankings {
        if rankings.len() != records.len() {
            return Err(Error::LengthMismatch {
                expected: records.len(),
                got: rankings.len(),
            });
        }
        let mut total = 0.0;
        for (record, ranking) in records.iter().zip(rankings) {
            total += kendall_tau(&record.annotator_ranking, ranking)?;
        }
        mean_taus.push(total / records.len() as f64);
    }
    Ok(WeightVector::from_mean_taus(&mean_taus))
}
