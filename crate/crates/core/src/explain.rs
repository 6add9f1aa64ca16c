//! Local feature-importance explanations and the feature rankings derived
//! from them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_model::LinearModel;

/// Additive log-odds contribution of each feature for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub contributions: Vec<f64>,
}

/// How a contribution is turned into a sort key.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Importance {
    /// `|contribution|`
    #[default]
    Absolute,
    /// Raw signed contribution.
    Signed,
}

/// Source of per-instance explanations. Only the exact linear explainer
/// ships; sampling-based explainers would implement this as well.
pub trait Explainer<M> {
    fn explain(&self, model: &M, row: &[f64]) -> Result<Explanation>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LinearExplainer;

impl Explainer<LinearModel> for LinearExplainer {
    fn explain(&self, model: &LinearModel, row: &[f64]) -> Result<Explanation> {
        explain_linear(model, row)
    }
}

/// `coefficients[j] * row[j]`; the bias is left out.
pub fn explain_linear(model: &LinearModel, row: &[f64]) -> Result<Explanation> {
    if row.len() != model.coefficients.len() {
        return Err(Error::LengthMismatch {
            expected: model.coefficients.len(),
            got: row.len(),
        });
    }
    Ok(Explanation {
        contributions: model.coefficients.iter().zip(row).map(|(c, x)| c * x).collect(),
    })
}

/// Feature indices ordered most-important first, either over all
/// `universe` features or a top-k prefix of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranking {
    features: Vec<usize>,
    universe: usize,
}

impl Ranking {
    pub fn new(features: Vec<usize>, universe: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidRanking("ranking is empty".into()));
        }
        if features.len() > universe {
            return Err(Error::InvalidRanking(format!(
                "{} entries for {universe} features",
                features.len()
            )));
        }
        let mut seen = HashSet::with_capacity(features.len());
        for &f in &features {
            if f >= universe {
                return Err(Error::InvalidRanking(format!(
                    "feature index {f} out of range for {universe} features"
                )));
            }
            if !seen.insert(f) {
                return Err(Error::InvalidRanking(format!("feature index {f} repeated")));
            }
        }
        Ok(Self { features, universe })
    }

    /// Map feature names onto schema positions.
    pub fn from_names<S: AsRef<str>>(names: &[S], schema_names: &[&str]) -> Result<Self> {
        let features = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                schema_names.iter().position(|s| *s == n).ok_or_else(|| {
                    Error::InvalidRanking(format!(
                        "unknown feature `{n}`; valid names: {}",
                        schema_names.join(", ")
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features, schema_names.len())
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.features.len() == self.universe
    }

    pub fn position(&self, feature: usize) -> Option<usize> {
        self.features.iter().position(|&f| f == feature)
    }

    pub fn names<'a>(&self, schema_names: &[&'a str]) -> Vec<&'a str> {
        self.features.iter().map(|&f| schema_names[f]).collect()
    }
}

/// Sort features by importance, descending, ties by ascending index, and
/// keep the first `k` when given.
pub fn to_ranking(explanation: &Explanation, k: Option<usize>, importance: Importance) -> Result<Ranking> {
    let n = explanation.contributions.len();
    if let Some(k) = k {
        if k == 0 || k > n {
            return Err(Error::TopKOutOfRange { k, features: n });
        }
    }
    let key: Vec<f64> = match importance {
        Importance::Absolute => explanation.contributions.iter().map(|c| c.abs()).collect(),
        Importance::Signed => explanation.contributions.clone(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    order.truncate(k.unwrap_or(n));
    Ranking::new(order, n)
}
