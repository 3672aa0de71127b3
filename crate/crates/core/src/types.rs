//! Domain types shared across the crate.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Model seed and explainer seed of one pipeline execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPair {
    pub model_seed: u64,
    pub explainer_seed: u64,
}

impl SeedPair {
    pub fn new(model_seed: u64, explainer_seed: u64) -> Self {
        Self {
            model_seed,
            explainer_seed,
        }
    }
}

/// Signed per-feature attributions for one instance and one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationVector {
    values: Vec<f64>,
    feature_names: Arc<[String]>,
    instance_id: String,
    seed_pair: SeedPair,
}

impl ExplanationVector {
    pub fn new(
        values: Vec<f64>,
        feature_names: Arc<[String]>,
        instance_id: impl Into<String>,
        seed_pair: SeedPair,
    ) -> Result<Self> {
        if values.len() != feature_names.len() {
            return Err(Error::validation(format!(
                "{} attribution values for {} feature names",
                values.len(),
                feature_names.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::validation("explanations need at least 2 features"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "attribution for feature `{}` is not finite",
                feature_names[i]
            )));
        }
        Ok(Self {
            values,
            feature_names,
            instance_id: instance_id.into(),
            seed_pair,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn seed_pair(&self) -> SeedPair {
        self.seed_pair
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn ranking(&self) -> Ranking {
        // Values are finite by construction.
        Ranking::from_values(&self.values).expect("finite attributions")
    }

    /// Both vectors describe the same feature schema.
    pub fn same_schema(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.feature_names, &other.feature_names)
            || self.feature_names == other.feature_names
    }

    /// Sum of absolute attributions.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct ExplanationWire {
    instance_id: String,
    model_seed: u64,
    explainer_seed: u64,
    features: Vec<String>,
    phi: Vec<f64>,
}

impl Serialize for ExplanationVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ExplanationWire {
            instance_id: self.instance_id.clone(),
            model_seed: self.seed_pair.model_seed,
            explainer_seed: self.seed_pair.explainer_seed,
            features: self.feature_names.to_vec(),
            phi: self.values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ExplanationVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = ExplanationWire::deserialize(deserializer)?;
        ExplanationVector::new(
            wire.phi,
            wire.features.into(),
            wire.instance_id,
            SeedPair::new(wire.model_seed, wire.explainer_seed),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Tie rule used when two features have equal attribution magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    ByIndex,
}

/// Feature indices ordered by descending attribution magnitude.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
    tie_rule: TieRule,
}

impl Ranking {
    /// Ranks features by descending `|value|`, ties broken by ascending index.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "value at index {i} is not finite"
            )));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .abs()
                .partial_cmp(&values[a].abs())
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(Self {
            order,
            tie_rule: TieRule::ByIndex,
        })
    }

    /// Wraps an explicit order, checking that it is a permutation of `0..d`.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let d = order.len();
        let mut seen = vec![false; d];
        for &i in &order {
            if i >= d || std::mem::replace(&mut seen[i], true) {
                return Err(Error::validation(format!(
                    "order {order:?} is not a permutation of 0..{d}"
                )));
            }
        }
        Ok(Self {
            order,
            tie_rule: TieRule::ByIndex,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            order: (0..d).collect(),
            tie_rule: TieRule::ByIndex,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Feature indices in the first `k` positions.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    /// `positions()[feature]` is the rank position of `feature`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &f) in self.order.iter().enumerate() {
            pos[f] = p;
        }
        pos
    }

    /// Relabels items: item `i` becomes `relabel[i]`.
    pub fn relabeled(&self, relabel: &[usize]) -> Result<Self> {
        Self::from_order(self.order.iter().map(|&i| relabel[i]).collect())
    }
}

/// Convenience wrapper around [`Ranking::from_values`] for a validated vector.
pub fn ranking_of(phi: &ExplanationVector) -> Ranking {
    phi.ranking()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Logreg,
    Dtree,
    Rforest,
    Mlp,
}

impl ModelClass {
    pub const ALL: [ModelClass; 4] = [
        ModelClass::Logreg,
        ModelClass::Dtree,
        ModelClass::Rforest,
        ModelClass::Mlp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelClass::Logreg => "logreg",
            ModelClass::Dtree => "dtree",
            ModelClass::Rforest => "rforest",
            ModelClass::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown model class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainerKind {
    Exact,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplicitySetting {
    /// Model seed and explainer seed vary jointly.
    Overall,
    /// Model seed varies, explainer seed fixed.
    ModelInduced,
    /// Model fixed, explainer seed varies.
    ExplainerInduced,
}

impl MultiplicitySetting {
    pub fn as_str(&self) -> &'static str {
        match self {
            MultiplicitySetting::Overall => "overall",
            MultiplicitySetting::ModelInduced => "model_induced",
            MultiplicitySetting::ExplainerInduced => "explainer_induced",
        }
    }
}

impl fmt::Display for MultiplicitySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The fixed audit unit that is rerun under different seeds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationQuery {
    pub dataset_id: String,
    pub fold_id: usize,
    /// Row index into the test fold.
    pub instance_index: usize,
    pub model_class: ModelClass,
    pub explainer_kind: ExplainerKind,
    pub background_size: usize,
}

impl ExplanationQuery {
    pub fn validate(&self, test_fold_size: usize, train_split_size: usize) -> Result<()> {
        if self.instance_index >= test_fold_size {
            return Err(Error::validation(format!(
                "instance index {} out of range for test fold {} of size {}",
                self.instance_index, self.fold_id, test_fold_size
            )));
        }
        if self.background_size == 0 || self.background_size > train_split_size {
            return Err(Error::validation(format!(
                "background size {} must lie in 1..={}",
                self.background_size, train_split_size
            )));
        }
        Ok(())
    }
}
