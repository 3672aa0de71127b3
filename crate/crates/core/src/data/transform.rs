use serde::{Deserialize, Serialize};

use super::{Cell, Dataset, FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

/// Per-feature encoder of the preprocessing transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnEncoder {
    Numeric {
        mean: f64,
        std: f64,
    },
    /// `level_offsets[level]` is the offset inside the group, `None` for
    /// levels not seen at fit time (encoded as all zeros).
    Categorical {
        level_offsets: Vec<Option<usize>>,
    },
}

/// One-hot encoding plus standardization, fitted on a training split.
///
/// Feature `j` occupies the encoded columns `group_map[j]`; groups partition
/// `0..width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessTransform {
    encoders: Vec<ColumnEncoder>,
    group_map: Vec<Vec<usize>>,
    width: usize,
}

/// Fits the transform on `train` only.
pub fn fit_transform(train: &Dataset) -> Result<PreprocessTransform> {
    if train.is_empty() {
        return Err(Error::validation(
            "cannot fit a transform on an empty split",
        ));
    }
    let schema: &FeatureSchema = train.schema();
    let mut encoders = Vec::with_capacity(schema.dim());
    let mut group_map = Vec::with_capacity(schema.dim());
    let mut next = 0;
    for (j, spec) in schema.features.iter().enumerate() {
        match spec.kind {
            FeatureKind::Numeric => {
                let column: Vec<f64> = train
                    .rows()
                    .iter()
                    .map(|r| match r[j] {
                        Cell::Num(v) => v,
                        Cell::Cat(_) => unreachable!("schema-checked"),
                    })
                    .collect();
                encoders.push(numeric_encoder(&column));
                group_map.push(vec![next]);
                next += 1;
            }
            FeatureKind::Categorical => {
                let mut seen = vec![false; spec.levels.len()];
                for r in train.rows() {
                    if let Cell::Cat(l) = r[j] {
                        seen[l as usize] = true;
                    }
                }
                let mut offset = 0;
                let level_offsets = seen
                    .iter()
                    .map(|&s| {
                        s.then(|| {
                            offset += 1;
                            offset - 1
                        })
                    })
                    .collect();
                encoders.push(ColumnEncoder::Categorical { level_offsets });
                group_map.push((next..next + offset).collect());
                next += offset;
            }
        }
    }
    Ok(PreprocessTransform {
        encoders,
        group_map,
        width: next,
    })
}

fn numeric_encoder(column: &[f64]) -> ColumnEncoder {
    let (lo, hi) = column
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return ColumnEncoder::Numeric { mean: lo, std: 1.0 };
    }
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    ColumnEncoder::Numeric {
        mean,
        std: if std > 0.0 { std } else { 1.0 },
    }
}

impl PreprocessTransform {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.encoders.len()
    }

    pub fn group_map(&self) -> &[Vec<usize>] {
        &self.group_map
    }

    pub fn encoders(&self) -> &[ColumnEncoder] {
        &self.encoders
    }

    /// Assembles a transform from parts, checking the partition invariant.
    pub fn from_parts(encoders: Vec<ColumnEncoder>, group_map: Vec<Vec<usize>>) -> Result<Self> {
        if encoders.len() != group_map.len() {
            return Err(Error::validation("one group per encoder is required"));
        }
        let width: usize = group_map.iter().map(Vec::len).sum();
        let mut covered = vec![false; width];
        for (enc, group) in encoders.iter().zip(&group_map) {
            for &c in group {
                if c >= width || std::mem::replace(&mut covered[c], true) {
                    return Err(Error::validation(
                        "group map does not partition the encoded columns",
                    ));
                }
            }
            let ok = match enc {
                ColumnEncoder::Numeric { std, .. } => group.len() == 1 && *std > 0.0,
                ColumnEncoder::Categorical { level_offsets } => {
                    level_offsets.iter().flatten().all(|&o| o < group.len())
                }
            };
            if !ok {
                return Err(Error::validation("encoder inconsistent with its group"));
            }
        }
        Ok(Self {
            encoders,
            group_map,
            width,
        })
    }

    /// Writes the encoding of feature `j`'s cell into `out` (full encoded width).
    pub fn encode_feature_into(&self, j: usize, cell: Cell, out: &mut [f64]) {
        let group = &self.group_map[j];
        match (&self.encoders[j], cell) {
            (ColumnEncoder::Numeric { mean, std }, Cell::Num(v)) => {
                out[group[0]] = (v - mean) / std
            }
            (ColumnEncoder::Categorical { level_offsets }, Cell::Cat(l)) => {
                for &c in group {
                    out[c] = 0.0;
                }
                if let Some(Some(o)) = level_offsets.get(l as usize) {
                    out[group[*o]] = 1.0;
                }
            }
            _ => panic!("cell kind does not match feature {j}"),
        }
    }

    pub fn encode_into(&self, row: &[Cell], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width);
        for (j, &cell) in row.iter().enumerate() {
            self.encode_feature_into(j, cell, out);
        }
    }

    pub fn encode(&self, row: &[Cell]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.encode_into(row, &mut out);
        out
    }

    /// Row-major encoding of a whole dataset.
    pub fn encode_all(&self, ds: &Dataset) -> Vec<f64> {
        let mut out = vec![0.0; self.width * ds.len()];
        for (row, chunk) in ds.rows().iter().zip(out.chunks_mut(self.width.max(1))) {
            self.encode_into(row, chunk);
        }
        out
    }
}
