//! Dual-seed multiplicity campaigns.
//!
//! A campaign fixes the dataset, model class, explainer and fold plan, then
//! reruns the pipeline under `R` seed pairs `(s_m, s_e)`:
//!
//! - `overall`: both seeds vary together,
//! - `model_induced`: model seeds vary under one explainer seed,
//! - `explainer_induced`: one model seed, explainer seeds vary.
//!
//! Each test instance receives `R` explanations that are compared pairwise.
//! Work units run in parallel on the ambient rayon pool and are merged in
//! (fold, instance, run) order, so reports do not depend on the thread count.

mod campaign;
mod config;
mod report;
mod strata;

pub use campaign::{dissect, explain_row, run_campaign, DissectReport, SideBySide};
pub use config::{
    AuditCampaign, BaselineConfig, DatasetSource, ExplainerConfig, FoldConfig, InstanceSelection,
    ModelConfig, SelectionMode,
};
pub use report::{
    write_explanations_jsonl, write_pairs_csv, AggregateDistribution, CampaignReport,
    DatasetSummary, InstanceResult, RunRecord, PAIRS_CSV_COLUMNS, REPORT_FORMAT,
    REPORT_FORMAT_VERSION,
};
pub use strata::{stratify_confidence, ConfidenceStratum, StratumSummary};
