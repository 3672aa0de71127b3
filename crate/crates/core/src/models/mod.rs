//! Seedable binary classifiers composed with the preprocessing transform.
//!
//! A [`PipelineModel`] evaluates `f(x) = g(T(x))`: raw rows are encoded by the
//! fitted [`PreprocessTransform`] and scored by a head `g` that returns the
//! positive-class probability. Every random draw made while fitting a head
//! comes from a stream keyed by the model seed.

mod logreg;
mod mlp;
mod selection;
mod tree;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use logreg::{LogisticRegressionHead, LogregParams};
pub use mlp::{MlpHead, MlpParams};
pub use selection::{default_grid, fit_with_selection, grid_search, roc_auc, GridSearchOutcome};
pub use tree::{DecisionTreeHead, ForestParams, RandomForestHead, TreeNode, TreeParams};

use crate::data::{fit_transform, Cell, ColumnEncoder, Dataset, PreprocessTransform};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::types::ModelClass;

/// Hyperparameters for one model class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum HyperParams {
    Logreg(LogregParams),
    Dtree(TreeParams),
    Rforest(ForestParams),
    Mlp(MlpParams),
}

impl HyperParams {
    pub fn model_class(&self) -> ModelClass {
        match self {
            HyperParams::Logreg(_) => ModelClass::Logreg,
            HyperParams::Dtree(_) => ModelClass::Dtree,
            HyperParams::Rforest(_) => ModelClass::Rforest,
            HyperParams::Mlp(_) => ModelClass::Mlp,
        }
    }

    pub fn default_for(class: ModelClass) -> Self {
        match class {
            ModelClass::Logreg => HyperParams::Logreg(LogregParams::default()),
            ModelClass::Dtree => HyperParams::Dtree(TreeParams::default()),
            ModelClass::Rforest => HyperParams::Rforest(ForestParams::default()),
            ModelClass::Mlp => HyperParams::Mlp(MlpParams::default()),
        }
    }
}

/// The fitted classifier `g` operating on encoded rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelHead {
    Logreg(LogisticRegressionHead),
    Dtree(DecisionTreeHead),
    Rforest(RandomForestHead),
    Mlp(MlpHead),
}

impl ModelHead {
    /// Positive-class probability of an encoded row.
    pub fn predict_encoded(&self, x: &[f64]) -> f64 {
        match self {
            ModelHead::Logreg(h) => h.predict(x),
            ModelHead::Dtree(h) => h.predict(x),
            ModelHead::Rforest(h) => h.predict(x),
            ModelHead::Mlp(h) => h.predict(x),
        }
    }

    /// Checks that every parameter is finite and the head fits `width` inputs.
    fn validate(&self, width: usize) -> Result<()> {
        let ok = match self {
            ModelHead::Logreg(h) => h.validate(width),
            ModelHead::Dtree(h) => h.validate(width),
            ModelHead::Rforest(h) => h.trees().iter().all(|t| t.validate(width)),
            ModelHead::Mlp(h) => h.validate(width),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(
                "model head is inconsistent with the transform",
            ))
        }
    }
}

/// `f(x) = g(T(x))` together with the seed and hyperparameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    feature_names: Arc<[String]>,
    transform: PreprocessTransform,
    head: ModelHead,
    hyperparams: HyperParams,
    model_seed: u64,
}

impl PipelineModel {
    pub fn from_parts(
        feature_names: Arc<[String]>,
        transform: PreprocessTransform,
        head: ModelHead,
        hyperparams: HyperParams,
        model_seed: u64,
    ) -> Result<Self> {
        if feature_names.len() != transform.dim() {
            return Err(Error::validation(
                "feature names do not match the transform",
            ));
        }
        head.validate(transform.width())?;
        Ok(Self {
            feature_names,
            transform,
            head,
            hyperparams,
            model_seed,
        })
    }

    pub fn model_class(&self) -> ModelClass {
        self.hyperparams.model_class()
    }

    pub fn model_seed(&self) -> u64 {
        self.model_seed
    }

    pub fn hyperparams(&self) -> &HyperParams {
        &self.hyperparams
    }

    pub fn transform(&self) -> &PreprocessTransform {
        &self.transform
    }

    pub fn head(&self) -> &ModelHead {
        &self.head
    }

    pub fn feature_names(&self) -> &Arc<[String]> {
        &self.feature_names
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn check_row(&self, row: &[Cell]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::Schema(format!(
                "row has {} cells, model expects {}",
                row.len(),
                self.dim()
            )));
        }
        for (j, (cell, enc)) in row.iter().zip(self.transform.encoders()).enumerate() {
            let ok = match (cell, enc) {
                (Cell::Num(v), ColumnEncoder::Numeric { .. }) => v.is_finite(),
                (Cell::Cat(l), ColumnEncoder::Categorical { level_offsets }) => {
                    (*l as usize) < level_offsets.len()
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "cell {cell:?} does not conform to feature `{}`",
                    self.feature_names[j]
                )));
            }
        }
        Ok(())
    }

    /// Positive-class probability of a raw row.
    pub fn predict_proba(&self, row: &[Cell]) -> Result<f64> {
        self.check_row(row)?;
        Ok(self.predict_encoded(&self.transform.encode(row)))
    }

    /// Positive-class probability of an encoded row.
    ///
    /// Linear and MLP heads accumulate their input sums group by group (one
    /// partial sum per semantic feature, in feature order), which is the same
    /// association the coalition evaluator uses.
    pub fn predict_encoded(&self, encoded: &[f64]) -> f64 {
        let groups = self.transform.group_map();
        match &self.head {
            ModelHead::Logreg(h) => {
                let mut z = h.bias();
                for g in groups {
                    z += group_dot(h.weights(), g, encoded);
                }
                sigmoid(z)
            }
            ModelHead::Mlp(h) => {
                let mut pre = h.hidden_bias().to_vec();
                for g in groups {
                    for (u, p) in pre.iter_mut().enumerate() {
                        *p += group_dot(h.input_weights(u), g, encoded);
                    }
                }
                h.predict_from_preactivations(&pre)
            }
            other => other.predict_encoded(encoded),
        }
    }
}

/// Dot product restricted to the columns of one group, in group order.
pub fn group_dot(weights: &[f64], group: &[usize], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &c in group {
        acc += weights[c] * x[c];
    }
    acc
}

/// Fits transform and head on `train` with all randomness keyed by `model_seed`.
pub fn train(train: &Dataset, hyperparams: &HyperParams, model_seed: u64) -> Result<PipelineModel> {
    if train.is_empty() {
        return Err(Error::validation("training split is empty"));
    }
    let positives = train.positives();
    if positives == 0 || positives == train.len() {
        return Err(Error::SingleClass);
    }
    let transform = fit_transform(train)?;
    let encoded = transform.encode_all(train);
    let width = transform.width();
    let labels = train.labels();
    let stream = SeedStream::new(model_seed).fork("train");
    let head = match hyperparams {
        HyperParams::Logreg(p) => ModelHead::Logreg(LogisticRegressionHead::fit(
            &encoded, width, labels, p, stream,
        )?),
        HyperParams::Dtree(p) => {
            ModelHead::Dtree(DecisionTreeHead::fit(&encoded, width, labels, p))
        }
        HyperParams::Rforest(p) => {
            ModelHead::Rforest(RandomForestHead::fit(&encoded, width, labels, p, stream))
        }
        HyperParams::Mlp(p) => ModelHead::Mlp(MlpHead::fit(&encoded, width, labels, p, stream)?),
    };
    PipelineModel::from_parts(
        train.schema().names(),
        transform,
        head,
        hyperparams.clone(),
        model_seed,
    )
}

/// Where a saved model's training and test rows came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitProvenance {
    pub dataset_id: String,
    pub fold_seed: u64,
    pub n_folds: usize,
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

pub const MODEL_FORMAT: &str = "multiplicity-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub model: PipelineModel,
    pub split: Option<SplitProvenance>,
}

impl ModelDocument {
    pub fn new(model: PipelineModel, split: Option<SplitProvenance>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            model,
            split,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        let m = doc.model;
        let model = PipelineModel::from_parts(
            m.feature_names,
            m.transform,
            m.head,
            m.hyperparams,
            m.model_seed,
        )?;
        Ok(Self { model, ..doc })
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
