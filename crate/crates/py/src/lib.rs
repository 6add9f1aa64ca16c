//! Python bindings: rank agreement, committee weights and disagreement
//! scores, whole simulations, and in-process annotation sessions.
//!
//! Structured results cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use alpp_core::dataset::load_dataset;
use alpp_core::experiment::{oracle_report as core_oracle_report, run_experiment, write_outputs, Summary};
use alpp_core::explain::{explain_linear, to_ranking};
use alpp_core::linear_model::train;
use alpp_core::rationale::{kendall_tau as core_kendall_tau, WeightVector};
use alpp_core::sampling::{kl_divergence as core_kl, weighted_max_disagreement as core_wmd};
use alpp_core::{ExperimentConfig, Importance, LinearModel, Ranking, Strategy, TrainConfig};
use alpp_service::{AnnotationPayload, ApiError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn core_err(e: alpp_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn api_err(e: ApiError) -> PyErr {
    if e.status.is_client_error() {
        PyValueError::new_err(e.message)
    } else {
        PyRuntimeError::new_err(e.message)
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_importance(signed: bool) -> Importance {
    if signed {
        Importance::Signed
    } else {
        Importance::Absolute
    }
}

/// Kendall tau-b between two rankings of feature indices over `universe`
/// features. If `a` is a top-k prefix, `b` is restricted to its items.
#[pyfunction]
fn kendall_tau(a: Vec<usize>, b: Vec<usize>, universe: usize) -> PyResult<f64> {
    let a = Ranking::new(a, universe).map_err(core_err)?;
    let b = Ranking::new(b, universe).map_err(core_err)?;
    core_kendall_tau(&a, &b).map_err(core_err)
}

/// Committee weights from per-member mean tau.
#[pyfunction]
fn weights_from_taus(mean_taus: Vec<f64>) -> Vec<f64> {
    WeightVector::from_mean_taus(&mean_taus).as_slice().to_vec()
}

/// KL(p || q) in nats for two `(p_neg, p_pos)` pairs.
#[pyfunction]
fn kl_divergence(p: (f64, f64), q: (f64, f64)) -> PyResult<f64> {
    core_kl(&[p.0, p.1], &[q.0, q.1]).map_err(core_err)
}

/// `max_c w_c KL(P_c || sum_c w_c P_c)` for per-member positive-class
/// probabilities.
#[pyfunction]
fn weighted_max_disagreement(p_positive: Vec<f64>, weights: Vec<f64>) -> PyResult<f64> {
    let preds: Vec<[f64; 2]> = p_positive.iter().map(|&p| [1.0 - p, p]).collect();
    let w = WeightVector::new(weights).map_err(core_err)?;
    core_wmd(&preds, &w).map_err(core_err)
}

/// Fit a logistic model by full-batch gradient descent.
/// Returns `(coefficients, bias)`.
#[pyfunction]
#[pyo3(signature = (rows, labels, learning_rate=1.0, epochs=1000, l2_penalty=1e-4))]
fn train_logistic(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
    learning_rate: f64,
    epochs: usize,
    l2_penalty: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let config = TrainConfig {
        learning_rate,
        epochs,
        l2_penalty,
        init_seed: 0,
    };
    let model = py
        .detach(|| {
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            train(&refs, &labels, &config)
        })
        .map_err(core_err)?;
    Ok((model.coefficients, model.bias))
}

/// Feature indices of a linear model's local explanation, most important
/// first, optionally truncated to `k`.
#[pyfunction]
#[pyo3(signature = (coefficients, row, k=None, signed=false))]
fn explain_ranking(coefficients: Vec<f64>, row: Vec<f64>, k: Option<usize>, signed: bool) -> PyResult<Vec<usize>> {
    let model = LinearModel::new(coefficients, 0.0).map_err(core_err)?;
    let e = explain_linear(&model, &row).map_err(core_err)?;
    let r = to_ranking(&e, k, parse_importance(signed)).map_err(core_err)?;
    Ok(r.features().to_vec())
}

fn load_config(path: PathBuf) -> PyResult<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(core_err)
}

/// Run the simulated-oracle experiment. Writes `results.csv` and
/// `summary.json` when `out_dir` is given; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config_path, out_dir=None, seed_offset=0, strategies=None))]
fn simulate<'py>(
    py: Python<'py>,
    config_path: PathBuf,
    out_dir: Option<PathBuf>,
    seed_offset: u64,
    strategies: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = load_config(config_path)?;
    if let Some(names) = strategies {
        config.strategies = names
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(core_err))
            .collect::<PyResult<_>>()?;
    }
    config.offset_seeds(seed_offset);
    let output = py.detach(|| run_experiment(&config)).map_err(core_err)?;
    if let Some(dir) = out_dir {
        write_outputs(&output, &dir).map_err(core_err)?;
    }
    to_py(py, &Summary::new(&output))
}

/// Oracle test accuracy and F1 per repetition.
#[pyfunction]
fn oracle_report<'py>(py: Python<'py>, config_path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let config = load_config(config_path)?;
    let reports = py.detach(|| core_oracle_report(&config)).map_err(core_err)?;
    to_py(py, &reports)
}

/// An annotation session driven from Python: the caller is the oracle.
#[pyclass(name = "Session")]
struct PySession {
    inner: alpp_service::Session,
}

#[pymethods]
impl PySession {
    #[new]
    #[pyo3(signature = (config_path, strategy="alpp", seed=None, queries=None))]
    fn new(py: Python<'_>, config_path: PathBuf, strategy: &str, seed: Option<u64>, queries: Option<usize>) -> PyResult<Self> {
        let mut config = load_config(config_path)?;
        let strategy: Strategy = strategy.parse().map_err(core_err)?;
        if let Some(q) = queries {
            config.queries = q;
        }
        let seed = seed.unwrap_or_else(|| config.seeds()[0]);
        config.strategies = vec![strategy];
        config.repetitions = 1;
        config.seeds = Some(vec![seed]);
        config.validate().map_err(core_err)?;
        let inner = py
            .detach(|| {
                let (dataset, _) = load_dataset(&config.dataset.path, &config.dataset.schema)?;
                alpp_service::Session::create("python".into(), config, &dataset, strategy, seed)
            })
            .map_err(api_err)?;
        Ok(Self { inner })
    }

    /// The current query document, or an error once the session is finished.
    fn query<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let doc = self.inner.query_document().map_err(api_err)?;
        to_py(py, &doc)
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.metrics_document())
    }

    /// Submit a label and a ranking of feature names; returns metrics.
    fn annotate<'py>(&mut self, py: Python<'py>, label: u8, ranking: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
        let payload = AnnotationPayload {
            label,
            ranking,
            query_number: None,
        };
        let inner = &mut self.inner;
        let metrics = py.detach(|| inner.annotate(payload)).map_err(api_err)?;
        to_py(py, &metrics)
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.status() == alpp_service::Status::Finished
    }
}

#[pymodule]
fn alpp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(weights_from_taus, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_max_disagreement, m)?)?;
    m.add_function(wrap_pyfunction!(train_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(explain_ranking, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_report, m)?)?;
    m.add_class::<PySession>()?;
    Ok(())
}
