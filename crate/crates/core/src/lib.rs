//! Explanation multiplicity auditing for Shapley-based feature attributions.
//!
//! A modeling-and-explanation pipeline is rerun under separated random seeds
//! (a model seed for training and selection, an explainer seed for the SHAP
//! approximation). The resulting attribution vectors are compared pairwise
//! with magnitude- and rank-based metrics, and the observed disagreement is
//! set against randomized null baselines (a closed-form Dirichlet model for
//! the l2 distance, Monte Carlo Mallows models for the rank metrics).
//!
//! Module map:
//!
//! - [`types`]: explanation vectors, rankings, seeds and queries.
//! - [`data`]: CSV ingestion, one-hot/standardization transform, stratified folds.
//! - [`models`]: seedable classifiers composed with the transform.
//! - [`explainer`]: exact Shapley enumeration and KernelSHAP.
//! - [`metrics`]: pairwise disagreement metrics.
//! - [`baselines`]: Dirichlet and Mallows null models.
//! - [`protocol`]: dual-seed campaigns and report assembly.

pub mod baselines;
pub mod data;
pub mod error;
pub mod explainer;
pub mod metrics;
pub mod models;
pub mod protocol;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ExplainerKind, ExplanationQuery, ExplanationVector, ModelClass, MultiplicitySetting, Ranking,
    SeedPair,
};
