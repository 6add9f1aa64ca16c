//! Result files. Both are byte-stable for a given config: no timestamps,
//! fixed row order, shortest round-trip float formatting.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{ExperimentOutput, ExperimentResult, OracleReport};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESULTS_HEADER: [&str; 6] = ["strategy", "repetition", "query", "f1", "accuracy", "selected_index"];

/// Per-query table writer.
pub struct ResultsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        inner.write_record(RESULTS_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write_output(&mut self, output: &ExperimentOutput) -> Result<()> {
        for curve in &output.curves {
            for p in &curve.points {
                self.inner.write_record([
                    curve.strategy.as_str().to_string(),
                    curve.repetition.to_string(),
                    p.query.to_string(),
                    p.f1.to_string(),
                    p.accuracy.to_string(),
                    p.selected_index.to_string(),
                ])?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::Csv(e.into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub total_rows: usize,
    pub dropped_rows: usize,
    pub oracle: &'a [OracleReport],
    pub truncated_runs: Vec<TruncatedRun>,
    pub result: &'a ExperimentResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedRun {
    pub strategy: String,
    pub repetition: usize,
    pub completed_queries: usize,
}

impl<'a> Summary<'a> {
    pub fn new(output: &'a ExperimentOutput) -> Self {
        Self {
            total_rows: output.total_rows,
            dropped_rows: output.dropped_rows,
            oracle: &output.oracle,
            truncated_runs: output
                .curves
                .iter()
                .filter(|c| c.exhausted)
                .map(|c| TruncatedRun {
                    strategy: c.strategy.to_string(),
                    repetition: c.repetition,
                    completed_queries: c.points.len(),
                })
                .collect(),
            result: &output.result,
        }
    }
}

/// Write `results.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let results_path = dir.join(RESULTS_FILE);
    let file = std::fs::File::create(&results_path).map_err(io_err(&results_path))?;
    let mut writer = ResultsWriter::new(std::io::BufWriter::new(file))?;
    writer.write_output(output)?;
    writer.finish()?;

    let summary_path = dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(&Summary::new(output))
        .map_err(|e| Error::Config(format!("cannot serialize summary: {e}")))?;
    json.push('\n');
    std::fs::write(&summary_path, json).map_err(io_err(&summary_path))?;
    Ok(())
}
