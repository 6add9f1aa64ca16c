//! Binary logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::error::{Error, Result};

/// `[P(negative), P(positive)]`.
pub type ProbabilityPair = [f64; 2];

/// Logits are clamped to this magnitude so both class probabilities stay
/// strictly positive.
const LOGIT_LIMIT: f64 = 700.0;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(features: usize) -> Self {
        Self {
            coefficients: vec![0.0; features],
            bias: 0.0,
        }
    }

    pub fn new(coefficients: Vec<f64>, bias: f64) -> Result<Self> {
        if !bias.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTrainConfig("model parameters must be finite".into()));
        }
        Ok(Self { coefficients, bias })
    }

    pub fn feature_count(&self) -> usize {
        self.coefficients.len()
    }

    fn check_len(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.coefficients.len() {
            return Err(Error::LengthMismatch {
                expected: self.coefficients.len(),
                got: row.len(),
            });
        }
        Ok(())
    }

    pub fn logit(&self, row: &[f64]) -> Result<f64> {
        self.check_len(row)?;
        Ok(self.logit_unchecked(row))
    }

    fn logit_unchecked(&self, row: &[f64]) -> f64 {
        self.bias + dot(&self.coefficients, row)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<ProbabilityPair> {
        let z = self.logit(row)?.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
        Ok([logistic(-z), logistic(z)])
    }

    /// Positive iff `P(positive) > 0.5`; an exact tie goes to the negative class.
    pub fn predict_label(&self, row: &[f64]) -> Result<u8> {
        Ok(u8::from(self.logit(row)? > 0.0))
    }

    /// Accuracy and positive-class F1 at threshold 0.5.
    pub fn evaluate(&self, test: &TabularDataset) -> Result<Metrics> {
        let mut counts = Confusion::default();
        for (row, &truth) in test.rows().zip(test.labels()) {
            counts.record(self.predict_label(row)?, truth);
        }
        Ok(counts.metrics())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    /// Carried for reproducibility records; initialization is all-zero.
    #[serde(default)]
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 1000,
            l2_penalty: 1e-4,
            init_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidTrainConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidTrainConfig("epochs must be at least 1".into()));
        }
        if !self.l2_penalty.is_finite() || self.l2_penalty < 0.0 {
            return Err(Error::InvalidTrainConfig(format!(
                "l2_penalty must be finite and non-negative, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Mean log loss plus `l2/2 * |w|^2` (bias unpenalized), with its gradient
/// `(d/dw, d/db)`.
pub fn loss_and_gradient(
    model: &LinearModel,
    rows: &[&[f64]],
    labels: &[u8],
    l2_penalty: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let d = model.feature_count();
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d];
    let mut grad_bias = 0.0;
    for (row, &y) in rows.iter().zip(labels) {
        model.check_len(row)?;
        let z = model.logit_unchecked(row);
        let y = f64::from(y);
        // log(1 + e^z) - y z, evaluated stably.
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let residual = logistic(z) - y;
        for (g, x) in grad.iter_mut().zip(*row) {
            *g += residual * x;
        }
        grad_bias += residual;
    }
    let mut penalty = 0.0;
    for (g, w) in grad.iter_mut().zip(&model.coefficients) {
        *g = *g / n + l2_penalty * w;
        penalty += w * w;
    }
    Ok((loss / n + 0.5 * l2_penalty * penalty, grad, grad_bias / n))
}

/// Full-batch gradient descent from the all-zero model.
///
/// An empty training set yields the all-zero model. Single-class sets are
/// legal; the bias then drifts toward that class.
pub fn train(rows: &[&[f64]], labels: &[u8], config: &TrainConfig) -> Result<LinearModel> {
    config.validate()?;
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let d = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mut model = LinearModel::zeros(d);
    if rows.is_empty() {
        return Ok(model);
    }
    let n = rows.len() as f64;
    let targets: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    let mut grad = vec![0.0; d];
    for epoch in 1..=config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        let mut logit_sum = 0.0;
        for (row, y) in rows.iter().zip(&targets) {
            let z = model.logit_unchecked(row);
            logit_sum += z;
            let residual = logistic(z) - y;
            for (g, x) in grad.iter_mut().zip(*row) {
                *g += residual * x;
            }
            grad_bias += residual;
        }
        // The stable loss is finite exactly when every logit is.
        if !logit_sum.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        for (w, g) in model.coefficients.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g / n + config.l2_penalty * *w);
        }
        model.bias -= config.learning_rate * grad_bias / n;
        if !model.bias.is_finite() || model.coefficients.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
    }
    Ok(model)
}

/// Train on every row of a dataset.
pub fn train_on(dataset: &TabularDataset, config: &TrainConfig) -> Result<LinearModel> {
    let rows: Vec<&[f64]> = dataset.rows().collect();
    train(&rows, dataset.labels(), config)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, predicted: u8, truth: u8) {
        match (predicted, truth) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn metrics(&self) -> Metrics {
        let total = self.tp + self.fp + self.tn + self.fn_;
        let accuracy = if total == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / total as f64
        };
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}
