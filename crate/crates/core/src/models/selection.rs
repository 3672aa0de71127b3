//! Validation-split hyperparameter selection by ROC-AUC.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{train, ForestParams, HyperParams, LogregParams, MlpParams, PipelineModel, TreeParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::types::ModelClass;

/// Area under the ROC curve as the normalized Mann-Whitney U statistic; ties count 1/2.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::validation("scores and labels differ in length"));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: HyperParams,
    pub best_index: usize,
    /// Validation AUC per grid entry; empty when the grid has one entry.
    pub validation_auc: Vec<f64>,
}

/// Picks the grid entry with the highest AUC on one held-out 20% shuffle split.
///
/// The split and every candidate fit are keyed by `seed`. Ties go to the
/// earlier grid entry. A one-entry grid is returned without fitting.
pub fn grid_search(
    train_split: &Dataset,
    grid: &[HyperParams],
    seed: u64,
) -> Result<GridSearchOutcome> {
    match grid {
        [] => Err(Error::validation("hyperparameter grid is empty")),
        [only] => Ok(GridSearchOutcome {
            best: only.clone(),
            best_index: 0,
            validation_auc: Vec::new(),
        }),
        _ => {
            let stream = SeedStream::new(seed).fork("shuffle-split");
            let mut perm: Vec<usize> = (0..train_split.len()).collect();
            perm.shuffle(&mut stream.rng());
            let n_val = (train_split.len() as f64 * 0.2).ceil() as usize;
            let (val, fit) = perm.split_at(n_val);
            let (mut val, mut fit) = (val.to_vec(), fit.to_vec());
            val.sort_unstable();
            fit.sort_unstable();
            let val_ds = train_split.subset(&val);
            if val_ds.positives() == 0 || val_ds.positives() == val_ds.len() {
                return Err(Error::validation("validation split holds a single class"));
            }
            let fit_ds = train_split.subset(&fit);
            let fit_seed = stream.fork("fit").seed();
            let mut aucs = Vec::with_capacity(grid.len());
            for hp in grid {
                let model = train(&fit_ds, hp, fit_seed)?;
                let scores: Vec<f64> = val_ds
                    .rows()
                    .iter()
                    .map(|r| model.predict_encoded(&model.transform().encode(r)))
                    .collect();
                aucs.push(roc_auc(&scores, val_ds.labels())?);
            }
            let mut best_index = 0;
            for (i, &a) in aucs.iter().enumerate() {
                if a > aucs[best_index] {
                    best_index = i;
                }
            }
            Ok(GridSearchOutcome {
                best: grid[best_index].clone(),
                best_index,
                validation_auc: aucs,
            })
        }
    }
}

/// Selection then refit on the whole split; both steps keyed by `model_seed`.
pub fn fit_with_selection(
    train_split: &Dataset,
    grid: &[HyperParams],
    model_seed: u64,
) -> Result<(PipelineModel, GridSearchOutcome)> {
    let selection_seed = SeedStream::new(model_seed).fork("selection").seed();
    let outcome = grid_search(train_split, grid, selection_seed)?;
    let model = train(train_split, &outcome.best, model_seed)?;
    Ok((model, outcome))
}

/// A small grid per model class.
pub fn default_grid(class: ModelClass) -> Vec<HyperParams> {
    match class {
        ModelClass::Logreg => [1e-3, 1e-2]
            .into_iter()
            .map(|l2| {
                HyperParams::Logreg(LogregParams {
                    l2,
                    ..Default::default()
                })
            })
            .collect(),
        ModelClass::Dtree => {
            let mut grid = Vec::new();
            for max_depth in [Some(3), Some(5), None] {
                for min_samples_leaf in [5, 10] {
                    grid.push(HyperParams::Dtree(TreeParams {
                        max_depth,
                        min_samples_leaf,
                    }));
                }
            }
            grid
        }
        ModelClass::Rforest => {
            let mut grid = Vec::new();
            for max_depth in [Some(7), Some(15)] {
                for min_samples_leaf in [1, 5] {
                    grid.push(HyperParams::Rforest(ForestParams {
                        max_depth,
                        min_samples_leaf,
                        ..Default::default()
                    }));
                }
            }
            grid
        }
        ModelClass::Mlp => {
            let mut grid = Vec::new();
            for hidden in [64, 128] {
                for learning_rate in [1e-3, 3e-4] {
                    grid.push(HyperParams::Mlp(MlpParams {
                        hidden,
                        learning_rate,
                        ..Default::default()
                    }));
                }
            }
            grid
        }
    }
}
