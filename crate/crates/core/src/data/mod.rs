//! Dataset ingestion, the preprocessing transform and cross-validation folds.

mod folds;
mod schema;
mod transform;

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

pub use folds::{stratified_folds, FoldPlan};
pub use schema::{FeatureKind, FeatureSpec, LabelSpec, Schema};
pub use transform::{fit_transform, ColumnEncoder, PreprocessTransform};

use crate::error::{Error, Result};

/// One raw cell. Categorical cells index into the feature's level list.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(u32),
}

/// A feature schema with the categorical levels observed at ingestion.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub label: LabelSpec,
}

impl FeatureSchema {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn names(&self) -> Arc<[String]> {
        self.features
            .iter()
            .map(|f| f.name.clone())
            .collect::<Vec<_>>()
            .into()
    }

    /// Checks that a raw row matches this schema cell-for-cell.
    pub fn check_row(&self, row: &[Cell]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::Schema(format!(
                "row has {} cells, schema has {} features",
                row.len(),
                self.features.len()
            )));
        }
        for (cell, spec) in row.iter().zip(&self.features) {
            match (cell, spec.kind) {
                (Cell::Num(v), FeatureKind::Numeric) if v.is_finite() => {}
                (Cell::Cat(l), FeatureKind::Categorical) if (*l as usize) < spec.levels.len() => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "cell {cell:?} does not conform to feature `{}`",
                        spec.name
                    )))
                }
            }
        }
        Ok(())
    }
}

/// A typed binary-classification table.
#[derive(Debug, Clone)]
pub struct Dataset {
    id: String,
    schema: Arc<FeatureSchema>,
    rows: Vec<Vec<Cell>>,
    labels: Vec<u8>,
    dropped_rows: usize,
}

const MISSING_MARKERS: [&str; 4] = ["", "?", "NA", "NaN"];

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        schema: Arc<FeatureSchema>,
        rows: Vec<Vec<Cell>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::validation("row and label counts differ"));
        }
        for row in &rows {
            schema.check_row(row)?;
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::validation("labels must be 0 or 1"));
        }
        Ok(Self {
            id: id.into(),
            schema,
            rows,
            labels,
            dropped_rows: 0,
        })
    }

    /// Reads a CSV with a header row. Rows with a missing cell are dropped and counted.
    pub fn from_reader(id: impl Into<String>, reader: impl Read, schema: &Schema) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header: Vec<String> = csv
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();

        let known =
            |h: &str| h == schema.label.column || schema.features.iter().any(|f| f.name == h);
        if let Some(unknown) = header.iter().find(|h| !known(h)) {
            return Err(Error::Schema(format!("unknown column `{unknown}`")));
        }
        let locate = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("column `{name}` missing from header")))
        };
        let feature_cols: Vec<usize> = schema
            .features
            .iter()
            .map(|f| locate(&f.name))
            .collect::<Result<_>>()?;
        let label_col = locate(&schema.label.column)?;

        // First pass: raw strings of complete rows.
        let mut raw_rows: Vec<Vec<String>> = Vec::new();
        let mut raw_labels: Vec<String> = Vec::new();
        let mut dropped_rows = 0;
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let cell = |c: usize| record.get(c).map(str::trim).unwrap_or("");
            let label = cell(label_col);
            let cells: Vec<&str> = feature_cols.iter().map(|&c| cell(c)).collect();
            if MISSING_MARKERS.contains(&label) || cells.iter().any(|c| MISSING_MARKERS.contains(c))
            {
                dropped_rows += 1;
                continue;
            }
            // Validate numerics eagerly so the error names the source row (1-based, after header).
            for (spec, value) in schema.features.iter().zip(&cells) {
                if spec.kind == FeatureKind::Numeric {
                    let parsed = value.parse::<f64>().ok().filter(|v| v.is_finite());
                    if parsed.is_none() {
                        return Err(Error::Parse {
                            row: i + 1,
                            column: spec.name.clone(),
                            message: format!("`{value}` is not a finite number"),
                        });
                    }
                }
            }
            raw_rows.push(cells.into_iter().map(str::to_string).collect());
            raw_labels.push(label.to_string());
        }

        let mut distinct_labels: Vec<&str> = raw_labels.iter().map(String::as_str).collect();
        distinct_labels.sort_unstable();
        distinct_labels.dedup();
        if distinct_labels.len() > 2 {
            return Err(Error::Schema(format!(
                "label column `{}` is not binary: {distinct_labels:?}",
                schema.label.column
            )));
        }

        let mut features: Vec<FeatureSpec> = schema.features.clone();
        for (j, spec) in features.iter_mut().enumerate() {
            if spec.kind == FeatureKind::Categorical {
                let mut levels: Vec<String> = raw_rows.iter().map(|r| r[j].clone()).collect();
                levels.sort();
                levels.dedup();
                spec.levels = levels;
            }
        }
        let rows = raw_rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&features)
                    .map(|(value, spec)| match spec.kind {
                        FeatureKind::Numeric => Cell::Num(value.parse().expect("validated above")),
                        FeatureKind::Categorical => {
                            let l = spec.levels.binary_search(value).expect("collected above");
                            Cell::Cat(l as u32)
                        }
                    })
                    .collect()
            })
            .collect();
        let labels = raw_labels
            .iter()
            .map(|l| u8::from(*l == schema.label.positive))
            .collect();
        let schema = Arc::new(FeatureSchema {
            features,
            label: schema.label.clone(),
        });
        Ok(Self {
            id: id.into(),
            schema,
            rows,
            labels,
            dropped_rows,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    /// Rows dropped at load because of missing cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// The same table under another id.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            id: self.id.clone(),
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dropped_rows: 0,
        }
    }
}

/// Loads a CSV file using a schema; the dataset id is the file stem.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::from_reader(id, std::io::BufReader::new(file), schema)
}
