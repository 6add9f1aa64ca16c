//! Batch simulation: every configured strategy on every repetition, with a
//! simulated oracle, followed by aggregation.

mod report;
mod run;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{write_outputs, ResultsWriter, Summary, RESULTS_FILE, RESULTS_HEADER, SUMMARY_FILE};
pub use run::{derive_seed, ActiveLearningRun, QueryMetrics, RunSettings};
pub use stats::{
    first_reaching, paired_t_test, summarize, Comparison, ExperimentResult, StrategySummary, TTest,
    ThresholdSummary,
};

use crate::config::ExperimentConfig;
use crate::dataset::{load_dataset, split_and_seed_with, SplitPools, TabularDataset};
use crate::error::Result;
use crate::linear_model::Metrics;
use crate::oracle::SimulatedOracle;
use crate::sampling::Strategy;

const POOL_STREAM: u64 = 3;

/// Per-query learner metrics for one (strategy, repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionCurve {
    pub strategy: Strategy,
    pub repetition: usize,
    pub seed: u64,
    pub points: Vec<QueryMetrics>,
    /// The unlabeled pool ran out before the query budget.
    pub exhausted: bool,
}

/// Everything shared by the strategies of one repetition: the split, the
/// initial pool and the oracle.
#[derive(Debug, Clone)]
pub struct RepetitionSetup {
    pub repetition: usize,
    pub seed: u64,
    pub pools: SplitPools,
    pub oracle: SimulatedOracle,
    pub oracle_metrics: Metrics,
}

impl RepetitionSetup {
    pub fn prepare(config: &ExperimentConfig, dataset: &TabularDataset, repetition: usize, seed: u64) -> Result<Self> {
        let pools = split_pools(config, dataset, seed)?;
        let oracle =
            SimulatedOracle::build(&pools.train, &config.oracle)?.with_importance(config.variants.importance);
        let oracle_metrics = oracle.evaluate(&pools.test)?;
        Ok(Self {
            repetition,
            seed,
            pools,
            oracle,
            oracle_metrics,
        })
    }
}

/// Train/test split and initial pool for a repetition seed.
pub fn split_pools(config: &ExperimentConfig, dataset: &TabularDataset, seed: u64) -> Result<SplitPools> {
    let split_seed = if config.resplit_per_repetition {
        seed
    } else {
        config.split_seed
    };
    split_and_seed_with(dataset, split_seed, derive_seed(seed, POOL_STREAM, 0))
}

/// Drive one strategy through the query budget with the simulated oracle.
pub fn run_strategy(config: &ExperimentConfig, setup: &RepetitionSetup, strategy: Strategy) -> Result<RepetitionCurve> {
    let settings = RunSettings::from_config(config, strategy, setup.seed);
    let mut run = ActiveLearningRun::new(setup.pools.clone(), settings)?;
    let mut exhausted = false;
    for _ in 0..config.queries {
        let Some(index) = run.next_query()? else {
            exhausted = true;
            break;
        };
        let answer = setup.oracle.answer(run.pools().train.row(index), config.oracle_top_k)?;
        run.submit(index, answer.label, answer.ranking)?;
    }
    Ok(RepetitionCurve {
        strategy,
        repetition: setup.repetition,
        seed: setup.seed,
        points: run.curve().to_vec(),
        exhausted,
    })
}

/// One repetition of one strategy from scratch.
pub fn run_repetition(
    config: &ExperimentConfig,
    dataset: &TabularDataset,
    strategy: Strategy,
    seed: u64,
) -> Result<RepetitionCurve> {
    let setup = RepetitionSetup::prepare(config, dataset, 0, seed)?;
    run_strategy(config, &setup, strategy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub repetition: usize,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub dropped_rows: usize,
    pub total_rows: usize,
    pub oracle: Vec<OracleReport>,
    pub curves: Vec<RepetitionCurve>,
    pub result: ExperimentResult,
}

/// Run all repetitions (in parallel) on an already-loaded dataset. Results
/// are ordered by repetition, then by configured strategy order.
pub fn run_experiment_on(config: &ExperimentConfig, dataset: &TabularDataset, dropped_rows: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let seeds = config.seeds();
    let per_rep: Vec<(OracleReport, Vec<RepetitionCurve>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(repetition, &seed)| {
            let setup = RepetitionSetup::prepare(config, dataset, repetition, seed)?;
            let curves = config
                .strategies
                .iter()
                .map(|&s| run_strategy(config, &setup, s))
                .collect::<Result<Vec<_>>>()?;
            let report = OracleReport {
                repetition,
                seed,
                train_rows: setup.pools.train.len(),
                test_rows: setup.pools.test.len(),
                accuracy: setup.oracle_metrics.accuracy,
                f1: setup.oracle_metrics.f1,
            };
            Ok((report, curves))
        })
        .collect::<Result<_>>()?;
    let (oracle, nested): (Vec<_>, Vec<_>) = per_rep.into_iter().unzip();
    let curves: Vec<RepetitionCurve> = nested.into_iter().flatten().collect();
    let result = summarize(&curves, config.queries, config.threshold);
    Ok(ExperimentOutput {
        dropped_rows,
        total_rows: dataset.len(),
        oracle,
        curves,
        result,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let (dataset, dropped) = load_dataset(&config.dataset.path, &config.dataset.schema)?;
    run_experiment_on(config, &dataset, dropped)
}

/// Oracle quality for every repetition seed, without running the loop.
pub fn oracle_report(config: &ExperimentConfig) -> Result<Vec<OracleReport>> {
    config.validate()?;
    let (dataset, _) = load_dataset(&config.dataset.path, &config.dataset.schema)?;
    config
        .seeds()
        .par_iter()
        .enumerate()
        .map(|(repetition, &seed)| {
            let setup = RepetitionSetup::prepare(config, &dataset, repetition, seed)?;
            Ok(OracleReport {
                repetition,
                seed,
                train_rows: setup.pools.train.len(),
                test_rows: setup.pools.test.len(),
                accuracy: setup.oracle_metrics.accuracy,
                f1: setup.oracle_metrics.f1,
            })
        })
        .collect()
}
