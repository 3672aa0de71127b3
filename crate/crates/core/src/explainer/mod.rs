//! Shapley attributions over semantic features.
//!
//! A coalition `S` of semantic features is valued by averaging the model's
//! positive-class probability over the background rows, with the features in
//! `S` taken from the explained instance and all others taken from the
//! background row (interventional replacement). All encoded columns of a
//! feature are swapped together.

mod exact;
mod game;
mod kernel;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

pub use exact::{exact_shapley, MAX_EXACT_FEATURES};
pub use game::CoalitionGame;
pub use kernel::{default_budget, kernel_shap, plan_coalitions, CoalitionPlan, CoalitionSample};

use crate::data::{Cell, Dataset};
use crate::error::{Error, Result};
use crate::models::PipelineModel;
use crate::rng::SeedStream;
use crate::types::{ExplanationVector, SeedPair};

/// Rows used to impute absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    rows: Vec<Vec<Cell>>,
    /// Positions of the sampled rows in the split they were drawn from.
    source_rows: Vec<usize>,
    explainer_seed: u64,
}

impl BackgroundSet {
    pub fn new(rows: Vec<Vec<Cell>>, source_rows: Vec<usize>, explainer_seed: u64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::validation(
                "background set must hold at least one row",
            ));
        }
        Ok(Self {
            rows,
            source_rows,
            explainer_seed,
        })
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn explainer_seed(&self) -> u64 {
        self.explainer_seed
    }
}

/// Uniform sample of `k` rows without replacement, keyed by `explainer_seed`.
pub fn sample_background(
    train_split: &Dataset,
    k: usize,
    explainer_seed: u64,
) -> Result<BackgroundSet> {
    let n = train_split.len();
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "background size {k} must lie in 1..={n} (training split size)"
        )));
    }
    let mut rng = SeedStream::new(explainer_seed).fork("background").rng();
    let picked = sample(&mut rng, n, k).into_vec();
    let rows = picked
        .iter()
        .map(|&i| train_split.row(i).to_vec())
        .collect();
    BackgroundSet::new(rows, picked, explainer_seed)
}

/// Coalition value: mean prediction over background rows with features in `mask` taken from `x`.
pub fn value_function(
    model: &PipelineModel,
    x: &[Cell],
    mask: &[bool],
    bg: &BackgroundSet,
) -> Result<f64> {
    let game = CoalitionGame::new(model, x, bg)?;
    if mask.len() != game.dim() {
        return Err(Error::validation(format!(
            "mask has length {}, model has {} features",
            mask.len(),
            game.dim()
        )));
    }
    Ok(game.value(mask))
}

/// Output of an explainer call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Value of the empty coalition: mean background prediction.
    pub base_value: f64,
    /// Value of the full coalition: the model's prediction at `x`.
    pub prediction: f64,
    /// Distinct coalitions whose value entered the estimate.
    pub coalitions_evaluated: usize,
    /// Whether every coalition was evaluated.
    pub enumerated: bool,
}

impl Attribution {
    /// `|sum(phi) - (f(x) - base)|`.
    pub fn efficiency_residual(&self) -> f64 {
        (self.phi.iter().sum::<f64>() - (self.prediction - self.base_value)).abs()
    }

    pub fn into_explanation(
        self,
        model: &PipelineModel,
        instance_id: impl Into<String>,
        seeds: SeedPair,
    ) -> Result<ExplanationVector> {
        ExplanationVector::new(self.phi, model.feature_names().clone(), instance_id, seeds)
    }
}
