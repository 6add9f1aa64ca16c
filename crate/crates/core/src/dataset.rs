//! Tabular data ingestion, ordinal encoding, min-max scaling and the
//! train/test/pool split.
//!
//! Categorical attributes are encoded ordinally (category position in the
//! schema) rather than one-hot, so every attribute remains a single rankable
//! feature.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker used by the Adult files for a missing cell.
pub const MISSING_MARKER: &str = "?";

/// Number of initially labeled rows drawn per class.
pub const SEED_PER_CLASS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub label: String,
    pub positive_label: String,
    pub negative_label: String,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidSchema("no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(Error::InvalidSchema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature `{}`",
                    f.name
                )));
            }
            if let FeatureKind::Categorical { categories } = &f.kind {
                if categories.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` needs at least 2 categories",
                        f.name
                    )));
                }
                let unique: HashSet<_> = categories.iter().collect();
                if unique.len() != categories.len() {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature `{}` lists a category twice",
                        f.name
                    )));
                }
            }
        }
        if self.label.trim().is_empty() {
            return Err(Error::InvalidSchema("empty label column name".into()));
        }
        if seen.contains(self.label.as_str()) {
            return Err(Error::InvalidSchema(format!(
                "label column `{}` is also listed as a feature",
                self.label
            )));
        }
        if self.positive_label == self.negative_label {
            return Err(Error::InvalidSchema(
                "positive and negative label values must differ".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    /// One value per schema feature, in schema order.
    pub values: Vec<RawValue>,
    pub label: u8,
}

/// Parsed rows prior to encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<RawRow>,
    /// Rows skipped because they held a missing-value marker.
    pub dropped: usize,
}

/// Read a headed CSV file. Columns not named by the schema are ignored.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, schema: &FeatureSchema) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column_of = |name: &str| headers.iter().position(|h| h == name);

    let mut missing = Vec::new();
    let mut feature_columns = Vec::with_capacity(schema.features.len());
    for f in &schema.features {
        match column_of(&f.name) {
            Some(c) => feature_columns.push(c),
            None => missing.push(f.name.clone()),
        }
    }
    let label_column = column_of(&schema.label);
    if label_column.is_none() {
        missing.push(schema.label.clone());
    }
    if !missing.is_empty() {
        return Err(Error::HeaderMismatch { missing });
    }
    let label_column = label_column.unwrap_or_default();

    let mut rows = Vec::new();
    let mut dropped = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |c: usize| record.get(c).unwrap_or("");
        let has_missing = feature_columns
            .iter()
            .chain(std::iter::once(&label_column))
            .any(|&c| cell(c) == MISSING_MARKER);
        if has_missing {
            dropped += 1;
            continue;
        }

        let mut values = Vec::with_capacity(feature_columns.len());
        for (spec, &c) in schema.features.iter().zip(&feature_columns) {
            let raw = cell(c);
            values.push(match spec.kind {
                FeatureKind::Numeric => {
                    let v: f64 = raw.parse().map_err(|_| Error::UnparseableNumber {
                        row: line,
                        column: spec.name.clone(),
                        value: raw.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::UnparseableNumber {
                            row: line,
                            column: spec.name.clone(),
                            value: raw.to_string(),
                        });
                    }
                    RawValue::Number(v)
                }
                FeatureKind::Categorical { .. } => RawValue::Category(raw.to_string()),
            });
        }
        let raw_label = cell(label_column);
        let label = if raw_label == schema.positive_label {
            1
        } else if raw_label == schema.negative_label {
            0
        } else {
            return Err(Error::UnknownLabel {
                row: line,
                value: raw_label.to_string(),
                negative: schema.negative_label.clone(),
                positive: schema.positive_label.clone(),
            });
        };
        rows.push(RawRow { values, label });
    }
    Ok(RawTable { rows, dropped })
}

/// Affine map from a normalized column back to its encoded (ordinal or
/// numeric) value: `encoded = min + normalized * (max - min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Self { min, max }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            ((v - self.min) / range).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// A human-readable cell: the original number or the category name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DisplayValue {
    Number(f64),
    Category(String),
}

/// Min-max normalized feature matrix with binary labels.
///
/// Rows are stored contiguously; `scales` maps each column back to its
/// pre-normalization (encoded) value.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: FeatureSchema,
    values: Vec<f64>,
    labels: Vec<u8>,
    scales: Vec<ColumnScale>,
}

impl TabularDataset {
    /// Build from already-normalized rows. Fails if a cell leaves [0, 1] or
    /// shapes disagree.
    pub fn from_normalized(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        schema.validate()?;
        let width = schema.feature_count();
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidSchema(format!(
                    "normalized value {v} outside [0, 1]"
                )));
            }
            values.extend(row);
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidSchema("labels must be 0 or 1".into()));
        }
        let scales = vec![ColumnScale { min: 0.0, max: 1.0 }; width];
        Ok(Self {
            schema,
            values,
            labels,
            scales,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.schema.feature_count()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.feature_count();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.feature_count())
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn scales(&self) -> &[ColumnScale] {
        &self.scales
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Map a normalized row back to original units; categorical columns are
    /// rounded to the nearest category.
    pub fn denormalize(&self, row: &[f64]) -> Result<Vec<DisplayValue>> {
        if row.len() != self.feature_count() {
            return Err(Error::LengthMismatch {
                expected: self.feature_count(),
                got: row.len(),
            });
        }
        Ok(self
            .schema
            .features
            .iter()
            .zip(&self.scales)
            .zip(row)
            .map(|((spec, scale), &v)| {
                let encoded = scale.denormalize(v);
                match &spec.kind {
                    FeatureKind::Numeric => {
                        // Strip accumulated rounding noise from the affine round trip.
                        DisplayValue::Number((encoded * 1e9).round() / 1e9)
                    }
                    FeatureKind::Categorical { categories } => {
                        let i = (encoded.round().max(0.0) as usize).min(categories.len() - 1);
                        DisplayValue::Category(categories[i].clone())
                    }
                }
            })
            .collect())
    }

    /// Subset of rows (in the given order) re-scaled with `scales` fitted on
    /// some reference subset. Values outside the reference range are clamped.
    fn subset_rescaled(&self, indices: &[usize], fitted: &[ColumnScale]) -> Self {
        let w = self.feature_count();
        let mut values = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            values.extend(self.row(i).iter().zip(fitted).map(|(&v, s)| s.normalize(v)));
        }
        let scales = self
            .scales
            .iter()
            .zip(fitted)
            .map(|(outer, inner)| {
                // Compose: encoded = outer(inner(normalized)).
                let min = outer.denormalize(inner.min);
                let max = outer.denormalize(inner.max);
                if inner.max > inner.min {
                    ColumnScale { min, max }
                } else {
                    ColumnScale { min, max: min }
                }
            })
            .collect();
        Self {
            schema: self.schema.clone(),
            values,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            scales,
        }
    }

    /// Re-fit the min-max scaling on the rows themselves.
    pub fn renormalized(&self) -> Self {
        let all: Vec<usize> = (0..self.len()).collect();
        let fitted = self.fit_scales(&all);
        self.subset_rescaled(&all, &fitted)
    }

    fn fit_scales(&self, indices: &[usize]) -> Vec<ColumnScale> {
        (0..self.feature_count())
            .map(|j| ColumnScale::fit(indices.iter().map(|&i| self.row(i)[j])))
            .collect()
    }
}

/// Ordinal-encode categorical cells and min-max scale every column to [0, 1]
/// using the statistics of these rows. Constant columns map to 0.
pub fn encode_and_normalize(raw: &RawTable, schema: &FeatureSchema) -> Result<TabularDataset> {
    schema.validate()?;
    let width = schema.feature_count();
    let mut encoded = Vec::with_capacity(raw.rows.len() * width);
    for row in &raw.rows {
        if row.values.len() != width {
            return Err(Error::LengthMismatch {
                expected: width,
                got: row.values.len(),
            });
        }
        for (spec, value) in schema.features.iter().zip(&row.values) {
            encoded.push(encode_cell(spec, value)?);
        }
    }
    let labels: Vec<u8> = raw.rows.iter().map(|r| r.label).collect();
    let scales: Vec<ColumnScale> = (0..width)
        .map(|j| ColumnScale::fit(encoded.iter().skip(j).step_by(width).copied()))
        .collect();
    for row in encoded.chunks_exact_mut(width) {
        for (v, s) in row.iter_mut().zip(&scales) {
            *v = s.normalize(*v);
        }
    }
    let scales = scales
        .into_iter()
        .map(|s| if s.max > s.min { s } else { ColumnScale { min: s.min, max: s.min } })
        .collect();
    Ok(TabularDataset {
        schema: schema.clone(),
        values: encoded,
        labels,
        scales,
    })
}

fn encode_cell(spec: &FeatureSpec, value: &RawValue) -> Result<f64> {
    match (&spec.kind, value) {
        (FeatureKind::Numeric, RawValue::Number(v)) => Ok(*v),
        (FeatureKind::Categorical { categories }, RawValue::Category(c)) => categories
            .iter()
            .position(|k| k == c)
            .map(|i| i as f64)
            .ok_or_else(|| Error::UnknownCategory {
                feature: spec.name.clone(),
                value: c.clone(),
            }),
        (FeatureKind::Numeric, RawValue::Category(c)) => Err(Error::UnparseableNumber {
            row: 0,
            column: spec.name.clone(),
            value: c.clone(),
        }),
        (FeatureKind::Categorical { .. }, RawValue::Number(v)) => Err(Error::UnknownCategory {
            feature: spec.name.clone(),
            value: v.to_string(),
        }),
    }
}

/// Train/test halves plus the labeled/unlabeled partition of the train half.
#[derive(Debug, Clone)]
pub struct SplitPools {
    pub train: TabularDataset,
    pub test: TabularDataset,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl SplitPools {
    /// Labeled train indices in the order they were added.
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Unlabeled train indices, ascending.
    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn is_unlabeled(&self, index: usize) -> bool {
        self.unlabeled.binary_search(&index).is_ok()
    }

    /// Move one train index from the unlabeled to the labeled pool.
    pub fn mark_labeled(&mut self, index: usize) -> Result<()> {
        match self.unlabeled.binary_search(&index) {
            Ok(pos) => {
                self.unlabeled.remove(pos);
                self.labeled.push(index);
                Ok(())
            }
            Err(_) => Err(Error::Config(format!(
                "train row {index} is not in the unlabeled pool"
            ))),
        }
    }
}

/// Stratified 50:50 split, train-only re-normalization, and the initial
/// labeled pool of [`SEED_PER_CLASS`] rows per class.
///
/// Train receives `floor(n/2)` rows; test is clamped to the train ranges.
pub fn split_and_seed(dataset: &TabularDataset, seed: u64) -> Result<SplitPools> {
    split_and_seed_with(dataset, seed, seed)
}

/// As [`split_and_seed`], with separate seeds for the train/test partition
/// and for the initial labeled pool.
pub fn split_and_seed_with(dataset: &TabularDataset, split_seed: u64, pool_seed: u64) -> Result<SplitPools> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let train_target = dataset.len() / 2;
    let train_take = [by_class[0].len() / 2, train_target - by_class[0].len() / 2];

    let mut train_idx = Vec::with_capacity(train_target);
    let mut test_idx = Vec::with_capacity(dataset.len() - train_target);
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        let take = train_take[class].min(members.len());
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let fitted = dataset.fit_scales(&train_idx);
    let train = dataset.subset_rescaled(&train_idx, &fitted);
    let test = dataset.subset_rescaled(&test_idx, &fitted);

    let mut rng = ChaCha8Rng::seed_from_u64(pool_seed);
    rng.set_stream(1);
    let mut labeled = Vec::with_capacity(2 * SEED_PER_CLASS);
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == class).collect();
        if members.len() < SEED_PER_CLASS {
            return Err(Error::InsufficientClass {
                label: class,
                available: members.len(),
                needed: SEED_PER_CLASS,
            });
        }
        labeled.extend(
            index::sample(&mut rng, members.len(), SEED_PER_CLASS)
                .into_iter()
                .map(|k| members[k]),
        );
    }
    let chosen: HashSet<usize> = labeled.iter().copied().collect();
    let unlabeled = (0..train.len()).filter(|i| !chosen.contains(i)).collect();
    Ok(SplitPools {
        train,
        test,
        labeled,
        unlabeled,
    })
}

/// Convenience: ingest + encode in one step.
pub fn load_dataset(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<(TabularDataset, usize)> {
    let raw = ingest_csv(path, schema)?;
    let dropped = raw.dropped;
    Ok((encode_and_normalize(&raw, schema)?, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> FeatureSchema {
        FeatureSchema {
            features: vec![
                FeatureSpec::numeric("age"),
                FeatureSpec::categorical("grade", ["A", "B", "C"]),
            ],
            label: "income".into(),
            positive_label: ">50K".into(),
            negative_label: "<=50K".into(),
        }
    }

    #[test]
    fn drops_rows_with_missing_marker() {
        let csv = "age,grade,income\n30,A,>50K\n?,B,<=50K\n40,C,<=50K\n50,B,>50K\n";
        let t = ingest_reader(csv.as_bytes(), &toy_schema()).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.dropped, 1);
    }

    #[test]
    fn missing_header_column_is_reported() {
        let csv = "age,income\n30,>50K\n";
        match ingest_reader(csv.as_bytes(), &toy_schema()) {
            Err(Error::HeaderMismatch { missing }) => assert_eq!(missing, vec!["grade"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_names_row_and_column() {
        let csv = "age,grade,income\n30,A,>50K\nthirty,B,<=50K\n";
        match ingest_reader(csv.as_bytes(), &toy_schema()) {
            Err(Error::UnparseableNumber { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "age", "thirty"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extra_columns_are_ignored() {
        let csv = "fnlwgt,age,grade,income\n1,30,A,>50K\n";
        let t = ingest_reader(csv.as_bytes(), &toy_schema()).unwrap();
        assert_eq!(t.rows[0].values[0], RawValue::Number(30.0));
    }

    #[test]
    fn min_max_and_ordinal_encoding() {
        let raw = RawTable {
            rows: vec![
                RawRow { values: vec![RawValue::Number(20.0), RawValue::Category("A".into())], label: 0 },
                RawRow { values: vec![RawValue::Number(45.0), RawValue::Category("C".into())], label: 1 },
                RawRow { values: vec![RawValue::Number(70.0), RawValue::Category("B".into())], label: 0 },
            ],
            dropped: 0,
        };
        let ds = encode_and_normalize(&raw, &toy_schema()).unwrap();
        assert_eq!(ds.row(1), &[0.5, 1.0]);
        assert_eq!(ds.row(2), &[1.0, 0.5]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let schema = FeatureSchema {
            features: vec![FeatureSpec::numeric("x")],
            ..toy_schema()
        };
        let raw = RawTable {
            rows: (0..4).map(|i| RawRow { values: vec![RawValue::Number(7.0)], label: i % 2 }).collect(),
            dropped: 0,
        };
        let ds = encode_and_normalize(&raw, &schema).unwrap();
        assert!(ds.column(0).all(|v| v == 0.0));
        assert_eq!(ds.denormalize(ds.row(0)).unwrap(), vec![DisplayValue::Number(7.0)]);
    }

    #[test]
    fn unseen_category_is_an_error() {
        let raw = RawTable {
            rows: vec![RawRow { values: vec![RawValue::Number(1.0), RawValue::Category("Z".into())], label: 0 }],
            dropped: 0,
        };
        match encode_and_normalize(&raw, &toy_schema()) {
            Err(Error::UnknownCategory { feature, value }) => {
                assert_eq!((feature.as_str(), value.as_str()), ("grade", "Z"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_validation() {
        let mut s = toy_schema();
        s.features.push(FeatureSpec::numeric("age"));
        assert!(s.validate().is_err());
        let mut s = toy_schema();
        s.features[1] = FeatureSpec::categorical("grade", ["A"]);
        assert!(s.validate().is_err());
        let mut s = toy_schema();
        s.negative_label = s.positive_label.clone();
        assert!(s.validate().is_err());
        let mut s = toy_schema();
        s.features[0].name = " ".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn denormalize_inverts_scaling() {
        let raw = RawTable {
            rows: vec![
                RawRow { values: vec![RawValue::Number(20.0), RawValue::Category("A".into())], label: 0 },
                RawRow { values: vec![RawValue::Number(70.0), RawValue::Category("C".into())], label: 1 },
            ],
            dropped: 0,
        };
        let ds = encode_and_normalize(&raw, &toy_schema()).unwrap();
        let shown = ds.denormalize(&[0.5, 0.5]).unwrap();
        assert_eq!(shown, vec![DisplayValue::Number(45.0), DisplayValue::Category("B".into())]);
    }
}
