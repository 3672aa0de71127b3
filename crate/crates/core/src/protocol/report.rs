//! Report documents and flat output tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::AuditCampaign;
use super::strata::{ConfidenceStratum, StratumSummary};
use crate::baselines::BaselineBand;
use crate::error::Result;
use crate::metrics::{mean_median, pairs, FeatureSensitivityProfile, MetricKind, PairwiseSummary};
use crate::models::HyperParams;
use crate::types::{ExplanationVector, ModelClass, MultiplicitySetting, SeedPair};

pub const REPORT_FORMAT: &str = "multiplicity-report";
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Column order of the pairwise CSV table.
pub const PAIRS_CSV_COLUMNS: [&str; 13] = [
    "dataset",
    "model_class",
    "setting",
    "fold",
    "instance",
    "run_a",
    "run_b",
    "model_seed_a",
    "explainer_seed_a",
    "model_seed_b",
    "explainer_seed_b",
    "metric",
    "value",
];

/// Results for one test instance across all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    /// Row index in the loaded dataset.
    pub instance: usize,
    pub fold: usize,
    pub label: u8,
    /// Positive-class probability per run.
    pub predictions: Vec<f64>,
    /// Probability used for stratification: the common prediction when the
    /// model is fixed, otherwise the mean over runs.
    pub confidence: f64,
    pub stratum: ConfidenceStratum,
    pub metrics: Vec<PairwiseSummary>,
    pub sensitivity: FeatureSensitivityProfile,
    pub max_efficiency_residual: f64,
    #[serde(skip)]
    pub explanations: Vec<ExplanationVector>,
}

impl InstanceResult {
    pub fn summary(&self, metric: MetricKind) -> Option<&PairwiseSummary> {
        self.metrics.iter().find(|s| s.metric == metric)
    }
}

/// Distribution of per-instance mean disagreement for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateDistribution {
    pub metric: MetricKind,
    pub n_instances: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    /// In (fold, instance) order.
    pub instance_means: Vec<f64>,
}

impl AggregateDistribution {
    pub fn from_instance_means(metric: MetricKind, instance_means: Vec<f64>) -> Self {
        let (mean, median) = if instance_means.is_empty() {
            (None, None)
        } else {
            let (a, b) = mean_median(&instance_means);
            (Some(a), Some(b))
        };
        Self {
            metric,
            n_instances: instance_means.len(),
            mean,
            median,
            instance_means,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub rows: usize,
    pub dropped_rows: usize,
    pub positives: usize,
    pub features: Vec<String>,
}

/// Model and background provenance for one (fold, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub fold: usize,
    pub run: usize,
    pub model_seed: u64,
    pub explainer_seed: u64,
    pub hyperparams: HyperParams,
    /// Validation AUC per grid entry; empty when no search was needed.
    pub validation_auc: Vec<f64>,
    pub test_auc: f64,
    /// Dataset row indices of the background sample.
    pub background_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub campaign: AuditCampaign,
    pub dataset: DatasetSummary,
    pub fold_seed: u64,
    pub fold_sizes: Vec<usize>,
    pub seed_pairs: Vec<SeedPair>,
    pub n_coalitions: usize,
    pub background_size: usize,
    pub runs: Vec<RunRecord>,
    pub instances: Vec<InstanceResult>,
    pub aggregates: Vec<AggregateDistribution>,
    pub strata: Vec<StratumSummary>,
    pub total_mass: f64,
    /// `"config"` or `"empirical"`.
    pub total_mass_source: String,
    pub baseline_seed: u64,
    pub baselines: Vec<BaselineBand>,
    pub max_efficiency_residual: f64,
}

impl CampaignReport {
    pub fn aggregate(&self, metric: MetricKind) -> Option<&AggregateDistribution> {
        self.aggregates.iter().find(|a| a.metric == metric)
    }

    pub fn stratum(&self, stratum: ConfidenceStratum) -> Option<&StratumSummary> {
        self.strata.iter().find(|s| s.stratum == stratum)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn model_class(&self) -> ModelClass {
        self.campaign.model_class
    }

    pub fn setting(&self) -> MultiplicitySetting {
        self.campaign.setting
    }
}

/// One row per (instance, run pair, metric), columns as in [`PAIRS_CSV_COLUMNS`].
pub fn write_pairs_csv(report: &CampaignReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PAIRS_CSV_COLUMNS)?;
    let dataset = report.dataset.id.as_str();
    let class = report.model_class().as_str();
    let setting = report.setting().as_str();
    let seeds = &report.seed_pairs;
    for inst in &report.instances {
        for summary in &inst.metrics {
            for ((a, b), value) in pairs(seeds.len()).zip(&summary.values) {
                w.write_record([
                    dataset,
                    class,
                    setting,
                    &inst.fold.to_string(),
                    &inst.instance.to_string(),
                    &a.to_string(),
                    &b.to_string(),
                    &seeds[a].model_seed.to_string(),
                    &seeds[a].explainer_seed.to_string(),
                    &seeds[b].model_seed.to_string(),
                    &seeds[b].explainer_seed.to_string(),
                    summary.metric.as_str(),
                    &value.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct ExplanationLine<'a> {
    fold: usize,
    run: usize,
    #[serde(flatten)]
    explanation: &'a ExplanationVector,
}

/// One JSON object per explanation, in (fold, instance, run) order.
pub fn write_explanations_jsonl(report: &CampaignReport, mut out: impl Write) -> Result<()> {
    for inst in &report.instances {
        for (run, e) in inst.explanations.iter().enumerate() {
            let line = serde_json::to_string(&ExplanationLine {
                fold: inst.fold,
                run,
                explanation: e,
            })?;
            writeln!(out, "{line}").map_err(|e| crate::error::Error::io("<explanations>", e))?;
        }
    }
    Ok(())
}
