//! One annotation session: an AL++ run whose oracle is a person.

use std::path::{Path, PathBuf};

use alpp_core::dataset::{DisplayValue, TabularDataset};
use alpp_core::experiment::{split_pools, ActiveLearningRun, QueryMetrics, RunSettings};
use alpp_core::{ExperimentConfig, Ranking, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingAnnotation,
    Selecting,
    Finished,
}

/// Body of `POST /sessions/{id}/annotations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPayload {
    pub label: u8,
    /// Feature names, most important first; full or top-k.
    pub ranking: Vec<String>,
    /// Query number this annotation answers. When present it must match the
    /// current query, which turns a replayed submission into a conflict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_number: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedAnnotation {
    pub instance_index: usize,
    pub label: u8,
    pub ranking: Vec<String>,
}

/// On-disk form of a session. The run itself is rebuilt by replaying the
/// annotations, which is deterministic given config and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub schema_version: u32,
    pub id: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub config: ExperimentConfig,
    pub annotations: Vec<RecordedAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: DisplayValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub query: usize,
    pub f1: f64,
    pub accuracy: f64,
    pub selected_index: usize,
}

impl From<&QueryMetrics> for CurvePoint {
    fn from(m: &QueryMetrics) -> Self {
        Self {
            query: m.query,
            f1: m.f1,
            accuracy: m.accuracy,
            selected_index: m.selected_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelNames {
    pub negative: String,
    pub positive: String,
}

/// Response of `GET /sessions/{id}/query`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDocument {
    pub session_id: String,
    pub query_number: usize,
    pub instance_index: usize,
    pub instance: Vec<FeatureValue>,
    pub feature_names: Vec<String>,
    pub labels: LabelNames,
    pub current_f1: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

/// Response of `GET /sessions/{id}/metrics` and of annotation posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub session_id: String,
    pub status: Status,
    pub queries_done: usize,
    pub query_budget: usize,
    pub next_query_number: Option<usize>,
    pub current_f1: Option<f64>,
    pub current_accuracy: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    seed: u64,
    config: ExperimentConfig,
    run: ActiveLearningRun,
    feature_names: Vec<String>,
    annotations: Vec<RecordedAnnotation>,
    status: Status,
}

impl Session {
    /// Seed the pools, train the first committee and select the first query.
    pub fn create(
        id: String,
        config: ExperimentConfig,
        dataset: &TabularDataset,
        strategy: Strategy,
        seed: u64,
    ) -> Result<Self, ApiError> {
        let pools = split_pools(&config, dataset, seed)?;
        let run = ActiveLearningRun::new(pools, RunSettings::from_config(&config, strategy, seed))?;
        let feature_names = dataset.schema().feature_names().into_iter().map(String::from).collect();
        let mut session = Self {
            id,
            seed,
            config,
            run,
            feature_names,
            annotations: Vec::new(),
            status: Status::Selecting,
        };
        session.advance()?;
        Ok(session)
    }

    /// Rebuild from a snapshot by replaying every recorded annotation.
    pub fn restore(snapshot: Snapshot, dataset: &TabularDataset) -> Result<Self, ApiError> {
        if snapshot.schema_version != SNAPSHOT_VERSION {
            return Err(ApiError::bad_request(format!(
                "snapshot schema_version {} is not supported (expected {SNAPSHOT_VERSION})",
                snapshot.schema_version
            )));
        }
        let mut session = Self::create(snapshot.id, snapshot.config, dataset, snapshot.strategy, snapshot.seed)?;
        for a in snapshot.annotations {
            let expected = session.run.pending();
            if expected != Some(a.instance_index) {
                return Err(ApiError::internal(format!(
                    "snapshot replay diverged: recorded instance {}, selected {:?}",
                    a.instance_index, expected
                )));
            }
            session.annotate(AnnotationPayload {
                label: a.label,
                ranking: a.ranking,
                query_number: None,
            })?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn run(&self) -> &ActiveLearningRun {
        &self.run
    }

    pub fn query_budget(&self) -> usize {
        self.config.queries
    }

    fn advance(&mut self) -> Result<(), ApiError> {
        self.status = Status::Selecting;
        if self.run.queries_done() >= self.config.queries {
            self.status = Status::Finished;
            return Ok(());
        }
        self.status = match self.run.next_query()? {
            Some(_) => Status::AwaitingAnnotation,
            None => Status::Finished,
        };
        Ok(())
    }

    pub fn query_document(&self) -> Result<QueryDocument, ApiError> {
        let index = match (self.status, self.run.pending()) {
            (Status::AwaitingAnnotation, Some(i)) => i,
            (Status::Finished, _) => return Err(ApiError::conflict("session is finished")),
            _ => return Err(ApiError::conflict("session is selecting the next query")),
        };
        let train = &self.run.pools().train;
        let shown = train.denormalize(train.row(index))?;
        let schema = train.schema();
        Ok(QueryDocument {
            session_id: self.id.clone(),
            query_number: self.run.queries_done() + 1,
            instance_index: index,
            instance: self
                .feature_names
                .iter()
                .zip(shown)
                .map(|(name, value)| FeatureValue {
                    name: name.clone(),
                    value,
                })
                .collect(),
            feature_names: self.feature_names.clone(),
            labels: LabelNames {
                negative: schema.negative_label.clone(),
                positive: schema.positive_label.clone(),
            },
            current_f1: self.run.curve().last().map(|m| m.f1),
            curve: self.run.curve().iter().map(CurvePoint::from).collect(),
        })
    }

    pub fn metrics_document(&self) -> MetricsDocument {
        let last = self.run.curve().last();
        MetricsDocument {
            session_id: self.id.clone(),
            status: self.status,
            queries_done: self.run.queries_done(),
            query_budget: self.config.queries,
            next_query_number: (self.status == Status::AwaitingAnnotation).then(|| self.run.queries_done() + 1),
            current_f1: last.map(|m| m.f1),
            current_accuracy: last.map(|m| m.accuracy),
            weights: self.run.committee().map(|c| c.weights().as_slice().to_vec()),
            curve: self.run.curve().iter().map(CurvePoint::from).collect(),
        }
    }

    /// Validate without mutating.
    pub fn check_annotation(&self, payload: &AnnotationPayload) -> Result<(usize, Ranking), ApiError> {
        let index = match (self.status, self.run.pending()) {
            (Status::AwaitingAnnotation, Some(i)) => i,
            (Status::Finished, _) => return Err(ApiError::conflict("session is finished")),
            _ => return Err(ApiError::conflict("no query is awaiting annotation")),
        };
        if let Some(q) = payload.query_number {
            let current = self.run.queries_done() + 1;
            if q != current {
                return Err(ApiError::conflict(format!(
                    "annotation is for query {q}, but the current query is {current}"
                )));
            }
        }
        if payload.label > 1 {
            return Err(ApiError::bad_request(format!("label must be 0 or 1, got {}", payload.label)));
        }
        let names: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        let ranking = Ranking::from_names(&payload.ranking, &names).map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok((index, ranking))
    }

    /// Record the annotation, retrain, evaluate and select the next query.
    pub fn annotate(&mut self, payload: AnnotationPayload) -> Result<MetricsDocument, ApiError> {
        let (index, ranking) = self.check_annotation(&payload)?;
        self.status = Status::Selecting;
        self.run.submit(index, payload.label, ranking)?;
        self.annotations.push(RecordedAnnotation {
            instance_index: index,
            label: payload.label,
            ranking: payload.ranking,
        });
        self.advance()?;
        Ok(self.metrics_document())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            schema_version: SNAPSHOT_VERSION,
            id: self.id.clone(),
            seed: self.seed,
            strategy: self.run.settings().strategy,
            config: self.config.clone(),
            annotations: self.annotations.clone(),
        }
    }
}

pub fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.json"))
}

/// Write via a temporary file and rename, so a crash never leaves a
/// half-written snapshot.
pub fn write_snapshot(dir: &Path, snapshot: &Snapshot) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = snapshot_path(dir, &snapshot.id);
    let tmp = path.with_extension("json.tmp");
    let json = serde_json::to_vec_pretty(snapshot).map_err(std::io::Error::other)?;
    std::fs::write(&tmp, json)?;
    std::fs::rename(&tmp, &path)
}

pub fn read_snapshots(dir: &Path) -> std::io::Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for p in paths {
        let bytes = std::fs::read(&p)?;
        match serde_json::from_slice::<Snapshot>(&bytes) {
            Ok(s) => out.push(s),
            Err(e) => tracing::warn!("skipping unreadable snapshot {}: {e}", p.display()),
        }
    }
    Ok(out)
}
