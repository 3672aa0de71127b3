use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Assignment of every row to one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    pub stratified: bool,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Row indices of the test fold, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Row indices of the training split for `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled with a stream keyed by `seed`; the shuffled class
/// lists are concatenated and dealt round-robin, so per-class counts and fold
/// sizes each differ by at most one across folds.
pub fn stratified_folds(ds: &Dataset, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::validation("at least 2 folds are required"));
    }
    let mut rng = SeedStream::new(seed).fork("folds").rng();
    let mut dealt = Vec::with_capacity(ds.len());
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == class).collect();
        if members.len() < n_folds {
            return Err(Error::validation(format!(
                "class {class} has {} rows, fewer than {n_folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        dealt.extend(members);
    }
    let mut assignments = vec![0; ds.len()];
    for (pos, &row) in dealt.iter().enumerate() {
        assignments[row] = pos % n_folds;
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        stratified: true,
        assignments,
    })
}
